use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] kfold_stability::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("{}:{line}: {msg}", path.display())]
    Input { path: PathBuf, line: u64, msg: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 when no fold count is feasible, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(kfold_stability::Error::NoFeasibleK(_)) => 2,
            _ => 1,
        }
    }
}
