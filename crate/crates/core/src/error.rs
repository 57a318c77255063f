//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("atom budget exceeded: operation would produce {required} atoms (cap {cap})")]
    AtomCapacity { required: usize, cap: usize },

    #[error("grid too coarse: spacing {spacing} exceeds epsilon/2 = {limit}")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("translate leaves the group window: {0}")]
    MarginViolated(String),

    #[error("log-log fit requires positive values, found {0}")]
    NonPositiveSample(f64),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
