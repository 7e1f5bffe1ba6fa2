use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain an operation accepts.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sentiment scorer or specificity detector failed.
    #[error("scoring failed ({dimension}): {message}")]
    Scoring { dimension: &'static str, message: String },

    #[error("could not classify question: {message}")]
    Classification { message: String, raw: String },

    /// An operation was applied to an object in the wrong lifecycle state.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("session {session_id} is {status}; no further steps are accepted")]
    SessionClosed { session_id: String, status: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("llm request failed: {0}")]
    Llm(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}
