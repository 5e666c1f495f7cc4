//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulator, protocol, and I/O layers.
#[derive(Debug, Error)]
pub enum SfdlError {
    /// A value or argument violates an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Structural misconfiguration, e.g. mismatched parameter dimensions.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value surfaced during numeric work.
    #[error("numeric error: non-finite value at parameter index {index}")]
    NonFinite { index: usize },

    /// A file failed schema validation.
    #[error("schema error: {0}")]
    Schema(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input text (CSV field, JSON document, flag value).
    #[error("parse error: {0}")]
    Parse(String),

    /// A failure inside one communication round.
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<SfdlError>,
    },
}

pub type Result<T> = std::result::Result<T, SfdlError>;

impl SfdlError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SfdlError::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SfdlError::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        SfdlError::Schema(msg.into())
    }
}
