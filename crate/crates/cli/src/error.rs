use std::io;
use std::path::Path;

use thiserror::Error;

/// Process exit status. No other codes are ever returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    /// Unreadable, malformed or out-of-domain configuration, or an output
    /// that could not be written.
    ConfigError = 2,
    /// A solve did not reach the residual bounds.
    NonConvergence = 3,
    /// A validation gate (Monte Carlo agreement, property check, sweep
    /// ordering) failed.
    GateFailure = 4,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("{0}")]
    Numerical(#[from] disclosure_core::Error),
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Config(_) | CliError::Write { .. } => Status::ConfigError,
            CliError::Numerical(_) => Status::NonConvergence,
        }
    }

    pub(crate) fn write(path: &Path, source: io::Error) -> Self {
        CliError::Write {
            path: path.display().to_string(),
            source,
        }
    }
}
