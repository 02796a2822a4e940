use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("solver did not converge on {rows} of {total} rows")]
    SolverFailures { rows: usize, total: usize },
    #[error(transparent)]
    Core(#[from] meterguard_core::Error),
}

impl CliError {
    /// 2 for bad input, 3 for an infeasible request, 4 for solver failures.
    pub fn exit_code(&self) -> i32 {
        use meterguard_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Trace(_) | CliError::Io { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::SolverFailures { .. } => 4,
            CliError::Core(e) => match e {
                E::NonConvergence { .. } => 4,
                E::InfeasibleSupport { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
