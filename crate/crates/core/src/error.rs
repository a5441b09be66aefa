use std::io;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration violates the hard-disk constraint: sites {0} and {1} are both occupied")]
    ConstraintViolation(usize, usize),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A basis, fragment or matrix would exceed its configured size budget.
    #[error("capacity exceeded for {what}: estimated size {estimated} > cap {cap}")]
    Capacity {
        what: String,
        estimated: String,
        cap: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn capacity(what: impl Into<String>, estimated: impl ToString, cap: usize) -> Self {
        Error::Capacity {
            what: what.into(),
            estimated: estimated.to_string(),
            cap,
        }
    }
}
