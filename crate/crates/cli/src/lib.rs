//! Experiment runner: builds problems from TOML configs, runs the solvers
//! and writes traces, certificate reports and summaries.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod config;
pub mod error;
pub mod experiment;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::{execute, run_experiment, Command, Outcome};
