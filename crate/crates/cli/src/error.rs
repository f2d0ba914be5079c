use std::path::PathBuf;

use thiserror::Error;

/// Failure of a CLI run, mapped to the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(#[from] qme_core::Error),
}

impl CliError {
    /// 1 for anything wrong with the request, 2 when the integration itself
    /// fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }
}
