//! Error type shared by the clustering pipeline.

use thiserror::Error;

/// Errors raised by the clustering engine and its helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input is too small or too degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Two objects that must agree in shape do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An argument falls outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is out of its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A data value violates a type invariant (non-finite entry, duplicate id, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A simulation design cannot be realized (rejection sampling stalls).
    #[error("infeasible simulation spec: {0}")]
    InfeasibleSpec(String),

    /// The solution path is empty or has no further penalty level to offer.
    #[error("solution path exhausted: {0}")]
    PathExhausted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
