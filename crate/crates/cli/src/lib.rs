//! Configuration-driven experiments on top of `carbon-fbsde-core`: allowance
//! and option price curves, the small-abatement expansion, and the toy
//! Burgers model with its terminal point mass.

pub mod config;
pub mod experiments;
pub mod output;
pub mod tolerances;

use std::path::PathBuf;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::{run, Check, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] carbon_fbsde_core::Error),
    #[error("{0}")]
    Setup(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Exit statuses of the command line tool.
pub mod exit {
    pub const OK: u8 = 0;
    /// A named check of the experiment failed.
    pub const CHECK_FAILED: u8 = 1;
    /// Bad command line or configuration.
    pub const USAGE: u8 = 2;
    /// A solver refused its inputs or an artifact could not be written.
    pub const RUNTIME: u8 = 3;
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => exit::USAGE,
            RunError::Solver(_) | RunError::Io { .. } => exit::RUNTIME,
        }
    }
}

/// Writes every table of `outcome` into the configured output directory.
pub fn write_outcome(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, RunError> {
    outcome
        .tables
        .iter()
        .map(|t| {
            output::write_table(&cfg.output_dir, t, cfg)
                .map_err(|source| RunError::Io { path: cfg.output_dir.join(t.file_name()), source })
        })
        .collect()
}
