//! Experiment drivers, configuration and CSV output behind the CLI.

pub mod config;
pub mod experiments;
pub mod table;

pub use config::{parse_config, Experiment, ExperimentConfig, Variant};
pub use experiments::{iterations_to_floor, run_experiment, Outcome};
pub use table::Table;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] crate::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(crate::Error::Config(_)) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}
