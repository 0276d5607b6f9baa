//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Unified error for all fallible operations in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had an unusable dimension (empty, zero-sized, or
    /// mismatched with its peer).
    Dimension(String),
    /// A value that must be finite was NaN or infinite.
    NonFinite(String),
    /// A `ParamSet`'s layout metadata disagrees with its flat storage, or two
    /// parameter sets with different layouts were combined.
    Layout(String),
    /// A data-generation recipe is unsatisfiable or internally inconsistent.
    Recipe(String),
    /// An experiment or theory configuration violates a stated precondition.
    Config(String),
    /// Local training blew up: loss became non-finite or exceeded the guard
    /// threshold. Carries enough context to identify the offending step.
    Divergence {
        round: usize,
        client_id: usize,
        step: usize,
        loss: f64,
    },
    /// A linear system was too ill-conditioned to solve; reports the smallest
    /// eigenvalue encountered.
    Conditioning { min_eigenvalue: f64 },
    /// A paired test was handed samples with zero variance of differences.
    DegenerateVariance,
    /// A statistical operation needs more samples than it was given.
    SampleSize { needed: usize, got: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Layout(msg) => write!(f, "layout error: {msg}"),
            Error::Recipe(msg) => write!(f, "recipe error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Divergence {
                round,
                client_id,
                step,
                loss,
            } => write!(
                f,
                "divergence at round {round}, client {client_id}, step {step}: loss = {loss:e}"
            ),
            Error::Conditioning { min_eigenvalue } => write!(
                f,
                "ill-conditioned system: smallest eigenvalue {min_eigenvalue:e}"
            ),
            Error::DegenerateVariance => {
                write!(f, "paired differences have zero variance")
            }
            Error::SampleSize { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
