use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent scenario; `path` is the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("solver failure: {0}")]
    Solver(shf_core::Error),
    /// A property the pipeline exists to check did not hold.
    #[error("inequality violated: {0}")]
    Violated(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violated(_) => 1,
            CliError::Solver(_) | CliError::Io { .. } | CliError::Serialize(_) => 2,
            CliError::Config { .. } => 3,
        }
    }
}

impl From<shf_core::Error> for CliError {
    fn from(e: shf_core::Error) -> Self {
        use shf_core::Error as E;
        match e {
            E::ResidualSignViolation { .. } | E::MonotonicityViolation { .. } => CliError::Violated(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
