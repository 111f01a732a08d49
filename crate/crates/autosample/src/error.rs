//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed line in an interaction file.
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A violated precondition or domain constraint.
    #[error("{0}")]
    Domain(String),

    /// Invalid configuration (bad key, bad value, missing required field).
    #[error("config error: {0}")]
    Config(String),

    /// Training aborted because the loss became non-finite.
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (per-sampler losses: {losses:?})"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        losses: Vec<f64>,
    },

    /// A checkpoint file that cannot be read or does not match expectations.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by invalid user input rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
