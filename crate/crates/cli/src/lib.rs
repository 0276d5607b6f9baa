//! Experiment driver around `fedzmg-core`: declarative TOML configs, results
//! persistence as stable CSV, learning-rate grid search, metric reports, and
//! the convergence-theory checks — everything the `fedzmg` binary does,
//! exposed as a library so tests can drive it directly.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod federation_io;
pub mod parallel;
pub mod sink;
