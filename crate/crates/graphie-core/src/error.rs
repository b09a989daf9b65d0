//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not conform for an operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A NaN or infinity was produced or supplied.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// An operation was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Inconsistent or invalid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structured input failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A requested construction is impossible.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A model file is malformed or incompatible.
    #[error("model format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
