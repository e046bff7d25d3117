//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, estimation, and extraction routines.
#[derive(Debug, Error)]
pub enum FecgError {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix or signal dimensions do not conform.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input variable carries no information (constant, zero variance).
    #[error("degenerate variable: {0}")]
    DegenerateVariable(String),

    /// Too few samples, peaks, or channels to run the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A numerical routine failed (instability, rank deficiency, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FecgError>;
