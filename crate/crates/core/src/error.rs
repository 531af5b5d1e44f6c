//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by loaders, validators, and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file; carries the 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A node index fell outside `0..n_nodes`.
    #[error("node index {index} out of bounds for {n_nodes} nodes")]
    Bounds { index: usize, n_nodes: usize },

    /// Dimensions of two inputs do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Structurally well-formed input that violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Non-finite values appeared where finite ones are required.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
