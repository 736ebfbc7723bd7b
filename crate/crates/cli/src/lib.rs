//! Experiment runner library behind the `salemlab` binary: configuration
//! parsing, construction dispatch, and canonical report emission.

pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("{0}")]
    Core(String),
}

pub use config::{parse_config, Construction, ExperimentConfig};
pub use report::{emit_report, Details, Format, RunReport};
pub use runner::run_experiment;
