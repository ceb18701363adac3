use std::path::PathBuf;

use roadfield::{AnalysisError, DispersionError, ModelError, PdeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("run id `{run_id}` already used in {}", dir.display())]
    RunIdTaken { run_id: String, dir: PathBuf },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("steady solve did not converge ({0})")]
    NotConverged(String),
}

impl CliError {
    /// 2 for anything wrong with the inputs, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } | CliError::RunIdTaken { .. } => 2,
            _ => 3,
        }
    }
}
