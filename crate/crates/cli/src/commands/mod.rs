//! The five subcommands, as library functions so tests can call them
//! without spawning the binary.

pub mod analyze;
pub mod data_report;
pub mod grid;
pub mod run;
pub mod theory;

/// Version stamp recorded in result manifests.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
