//! Experiment harness: configuration, the budget × forecast × policy sweep,
//! and CSV reports.

pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, CellResult, CellStatus, Results};
pub use report::emit_outputs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{0}")]
    Run(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            _ => 1,
        }
    }
}
