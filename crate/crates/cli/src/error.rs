use std::path::PathBuf;

use fkcouple_core::CoreError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown {what} '{name}' (known: {known})")]
    UnknownName {
        what: &'static str,
        name: String,
        known: String,
    },
    #[error("invalid distance ladder: {0}")]
    InvalidLadder(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation diverged: {0}")]
    Diverged(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Machine-readable error written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownName { .. } | CliError::InvalidLadder(_) | CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::UnknownName { .. } => "unknown_name",
            CliError::InvalidLadder(_) => "invalid_ladder",
            CliError::Config(_) => "config",
            CliError::Diverged(_) => "diverged",
            CliError::Io { .. } => "io",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Diverged { .. } | CoreError::Divergence(_) => CliError::Diverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
