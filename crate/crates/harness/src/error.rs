use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error in {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] bfe_core::BfeError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub fn input(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        HarnessError::Input { path: path.into(), reason: reason.into() }
    }

    /// Process exit code: 2 when an optimizer run failed, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::RunsFailed { .. } => 2,
            HarnessError::Core(bfe_core::BfeError::RunFailure { .. }) => 2,
            _ => 1,
        }
    }
}
