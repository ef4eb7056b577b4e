//! Experiment runner behind the `gsopt` binary.

pub mod check;
pub mod config;
pub mod failure;
pub mod problem;
pub mod report;
pub mod solve;
pub mod synth;

pub use config::RunConfig;
pub use failure::{CliResult, Failure};
