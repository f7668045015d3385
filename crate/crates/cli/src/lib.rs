//! Experiment runner for `levy-fbsde`: JSON configs, CSV artifacts and the verification suite.

pub mod artifacts;
pub mod check;
pub mod commands;
pub mod config;
pub mod oracles;
pub mod output;
pub mod problems;
pub mod suite;

pub use check::Check;
pub use commands::{run, Cli, Command, Report};
pub use config::{ConfigError, ExperimentConfig};
