use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] densridge::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        }
    }
}
