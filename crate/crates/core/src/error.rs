//! Error type shared by every module in the crate.

use ndarray_linalg::c64;
use thiserror::Error;

/// Crate-wide error enum. Numerical guards (resolvent distance, resonance,
/// refinement caps) are errors rather than silent NaNs because every solver
/// in the crate relies on the guarded quantity being well defined.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown block label {0}")]
    UnknownBlock(i64),

    #[error("smoothness index must be nonnegative, got {0}")]
    NegativeAlpha(f64),

    #[error("block frequencies must be pairwise distinct; {0} appears twice")]
    DuplicateFrequency(f64),

    #[error("block sizes must be positive")]
    EmptyBlock,

    #[error("eigenvalues must be strictly decreasing")]
    EigenvalueOrder,

    #[error(
        "resolvent point {lambda} lies within {dist:.3e} of the eigenvalue {eigenvalue} \
         (guard 1e-12*(|lambda|+1))"
    )]
    SingularResolvent {
        lambda: c64,
        eigenvalue: f64,
        dist: f64,
    },

    #[error("i*omega for block {k} lies within {dist:.3e} of the closed-loop spectrum")]
    Resonance { k: i64, dist: f64 },

    #[error("singular linear system in {context} at block {k}")]
    SingularSystem { context: String, k: i64 },

    #[error("refinement cap reached before the tolerance was met in {0}")]
    AccuracyCap(String),

    #[error("initial state given as a profile requires a plant with an eigenfunction basis")]
    MissingBasis,

    #[error("requirement not met: {check}: {detail}")]
    RequirementFailed { check: String, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

pub type Result<T> = std::result::Result<T, CoreError>;
