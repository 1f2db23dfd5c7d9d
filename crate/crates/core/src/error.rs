//! Error type shared by all modules.

use thiserror::Error;

use crate::geometry::EdgeMode;

#[derive(Debug, Error)]
pub enum Error {
    /// Input contained NaN or infinite coordinates, or was structurally malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation needed more points than the sample provides.
    #[error("sample too small: need at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },

    /// The two samples do not live in the same ambient dimension.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// An operation was handed an edge system of the wrong mode.
    #[error("expected {expected:?} edge system, got {actual:?}")]
    WrongMode { expected: EdgeMode, actual: EdgeMode },

    /// A scalar or integer parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The grounded Laplacian could not be factorized at this temperature.
    #[error("grounded Laplacian numerically singular at lambda = {lambda}: {reason}")]
    IllConditioned { lambda: f64, reason: String },

    /// The permutation null has no spread, so the t-statistic is undefined.
    #[error("degenerate permutation null: variance = {variance}")]
    DegenerateNull { variance: f64 },

    /// Every pairwise distance is zero, so no bandwidth can be derived.
    #[error("degenerate bandwidth: all pairwise distances are zero")]
    DegenerateBandwidth,

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
