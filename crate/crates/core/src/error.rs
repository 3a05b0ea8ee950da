use thiserror::Error;

use crate::model::RowError;

/// An invalid argument to an otherwise total operation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ArgumentError(pub String);

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset config: {0}")]
    Config(String),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("dataset is not valid UTF-8: {0}")]
    Encoding(String),
    #[error("aborting after {count} malformed rows")]
    TooManyErrors { count: usize, rows: Vec<RowError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("span {0:?} not found in hypothesis")]
    NoMatch(String),
    #[error("branch {0} is not a neutral branch")]
    WrongBranch(crate::model::BranchId),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("pattern {id}: {message}")]
    Pattern { id: String, message: String },
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from the classifier / generator backends.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// Network-level failure; safe to retry.
    #[error("transport error: {0}")]
    Transport(String),
    /// The backend answered, but not with a valid protocol message.
    #[error("protocol error ({code}): {message}")]
    Protocol { code: String, message: String, raw_body: Option<String> },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ModelError {
    pub fn protocol(code: &str, message: impl Into<String>) -> Self {
        ModelError::Protocol { code: code.to_string(), message: message.into(), raw_body: None }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, ModelError::Transport(_))
    }
}
