use std::path::{Path, PathBuf};

use thiserror::Error;

/// Exit codes: usage 1, unreadable or malformed input 2, contract violation 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Contract(#[from] topdown_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Contract(topdown_core::Error::Parse { .. }) => 2,
            CliError::Contract(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Attributes a core error raised while reading `path` to that file.
    pub fn in_file(path: &Path, err: topdown_core::Error) -> Self {
        CliError::Parse { path: path.to_path_buf(), message: err.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
