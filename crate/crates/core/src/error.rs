//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A row of a dataset file could not be decoded.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A field held a value outside the documented vocabulary.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    /// Data violated a dataset or trial invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied argument was out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
