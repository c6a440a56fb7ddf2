//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("reference direction is zero")]
    ZeroBeta,

    #[error("no closed form for population D: {0}")]
    NoClosedForm(String),

    #[error("training diverged at step {step}: loss {loss:.6e} exceeds {bound:.6e}")]
    Divergence { step: u64, loss: f64, bound: f64 },

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("exact enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("checkpoint version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checkpoint checksum mismatch (file corrupted?)")]
    ChecksumMismatch,

    #[error("checkpoint incompatible with configuration: {0}")]
    IncompatibleCheckpoint(String),

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
