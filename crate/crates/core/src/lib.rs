//! Desk-scale federated learning simulator built around zero-mean gradient
//! projection.
//!
//! The crate provides, bottom to top:
//!
//! - [`param`]: flat parameter/gradient storage with per-layer layout metadata;
//! - [`zmg`]: the zero-mean projection operator and its shape-aware dispatch;
//! - [`optim`]: client update rules (plain SGD, projected SGD with momentum and
//!   decoupled weight decay) and server aggregation (weighted average, Adam);
//! - [`model`]: small differentiable models with exact hand-derived gradients;
//! - [`data`]: synthetic non-IID federation generation plus heterogeneity
//!   statistics;
//! - [`engine`]: the federated round loop (broadcast, cohort, local epochs,
//!   aggregation);
//! - [`analysis`]: evaluation metrics, a paired t-test, and numerical checks
//!   of the projection's variance-reduction and convergence claims.
//!
//! Everything is pure computation over `f64` slices: the crate is `no_std`
//! (with `alloc`) when the `std` feature is disabled, and all randomness comes
//! from counter-keyed deterministic streams so results never depend on thread
//! scheduling. IO, configuration files, and the CLI live in the companion
//! `fedzmg-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod data;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod param;
pub mod rng;
pub mod zmg;

pub use error::Error;
