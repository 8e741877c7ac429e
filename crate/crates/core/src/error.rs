use thiserror::Error;

/// Errors raised by the geometry, estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, threshold {threshold:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, threshold: f64 },

    #[error(
        "eigenvalues {} and {} are too close: gap {gap:e} is below tolerance {tolerance:e}",
        .index + 1,
        .index + 2
    )]
    NearDegenerateSpectrum {
        /// Zero-based position of the first eigenvalue of the offending pair.
        index: usize,
        gap: f64,
        tolerance: f64,
    },

    #[error("eigenvalues must be positive and strictly descending: {0}")]
    InvalidSpectrum(String),

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not orthogonal (max |O^T O - I| = {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("quadrature underflow: no ensemble member carries representable weight")]
    QuadratureUnderflow,

    #[error("likelihood maximization failed after {sweeps} sweeps: {reason}")]
    OptimizerFailure { sweeps: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Numeric failures (as opposed to bad inputs or domain violations).
    pub fn is_numeric_failure(&self) -> bool {
        matches!(self, Error::QuadratureUnderflow | Error::OptimizerFailure { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
