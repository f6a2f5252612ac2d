//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the math core, layers, training and I/O paths.
#[derive(Debug, Error)]
pub enum DennError {
    /// A parameter left its valid domain (e.g. non-positive sigma).
    #[error("domain error: {0}")]
    Domain(String),

    /// A layer could not be standardized: fewer than two valid spike
    /// times, or their spread is numerically zero.
    #[error("degenerate layer: {0}")]
    DegenerateLayer(String),

    /// Every output time on every frame was silent, so the posterior
    /// denominator is zero.
    #[error("degenerate posterior: all output times silent")]
    DegeneratePosterior,

    /// Tensor shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A binary file failed structural validation.
    #[error("parse error in {path} at offset {offset}: {message}")]
    Parse {
        path: String,
        offset: u64,
        message: String,
    },

    /// Configuration rejected before running anything.
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint does not match the evaluation configuration.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DennError>;
