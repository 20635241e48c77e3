//! Errors of the command-line layer, reported as stage-tagged JSON.

use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] manidens_core::Error),

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{}: {message}", file.display())]
    Io { file: PathBuf, message: String },

    #[error("{}:{line}: {message}", file.display())]
    Format { file: PathBuf, line: usize, message: String },

    #[error("experiment: {failed} of {total} replicates failed at n = {n}, above the cap")]
    TooManyFailures { n: usize, failed: usize, total: usize },

    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Machine-readable form written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub stage: String,
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(file: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { file: file.to_path_buf(), message: err.to_string() }
    }

    pub fn format(file: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Format { file: file.to_path_buf(), line, message: message.into() }
    }

    pub fn stage(&self) -> String {
        match self {
            CliError::Core(e) => e.stage().map_or("core", |s| s.name()).to_string(),
            CliError::Config { .. } => "config".into(),
            CliError::Io { .. } => "io".into(),
            CliError::Format { .. } => "format".into(),
            CliError::TooManyFailures { .. } => "experiment".into(),
            CliError::Usage(_) => "usage".into(),
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Core(e) => e.kind().into(),
            CliError::Config { .. } => "config".into(),
            CliError::Io { .. } => "io".into(),
            CliError::Format { .. } => "format".into(),
            CliError::TooManyFailures { .. } => "too_many_failures".into(),
            CliError::Usage(_) => "usage".into(),
        }
    }

    pub fn report(&self) -> ErrorReport {
        let key = match self {
            CliError::Config { path, .. } => Some(path.clone()),
            _ => None,
        };
        ErrorReport { stage: self.stage(), kind: self.kind(), message: self.to_string(), key }
    }
}
