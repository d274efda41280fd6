use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {}", .0.display())]
    Missing(PathBuf),

    #[error("{0}")]
    Core(lithoseg_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for missing inputs, 4 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Core(_) | CliError::Internal(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<lithoseg_core::Error> for CliError {
    fn from(e: lithoseg_core::Error) -> Self {
        use lithoseg_core::Error as E;
        match e {
            E::Config { .. } => CliError::Config(e.to_string()),
            E::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => CliError::Missing(path),
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// `Missing(path)` unless `path` exists.
pub fn require(path: impl Into<PathBuf>) -> CliResult<PathBuf> {
    let p = path.into();
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Missing(p))
    }
}
