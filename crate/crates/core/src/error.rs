use thiserror::Error;

use crate::bergman::IndexEstimate;

/// Errors raised across the toolkit.
///
/// Variants map one-to-one onto the failure modes of the individual
/// operations; the CLI turns them into exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ellipticity violated at {node}: {detail}")]
    EllipticityViolation { node: String, detail: String },

    #[error("eigenvalue {eigenvalue} within {tolerance:e} of the imaginary axis")]
    SpectralGapViolation { eigenvalue: String, tolerance: f64 },

    #[error("residue evaluation failed: {0}")]
    ResidueFailure(String),

    #[error("input is not an idempotent (defect {defect:e})")]
    NotIdempotent { defect: f64 },

    #[error("no collar expansion available: {0}")]
    CollarUnavailable(String),

    #[error("quadrature error: {0}")]
    QuadratureError(String),

    #[error("kernel resolution failed: {0}")]
    KernelResolutionFailure(String),

    #[error("index did not stabilize across the truncation schedule")]
    IndexUnstable(Box<IndexEstimate>),

    #[error("boundary loop under-sampled: argument jump {jump:.3} rad after sample {at}; retry with {next} samples")]
    UnderSampled { jump: f64, at: usize, next: usize },

    #[error("symbol not invertible on the boundary: min |det| = {min_abs_det:e}")]
    NotInvertibleOnBoundary { min_abs_det: f64 },

    #[error("orientation calibration required before computing the topological index")]
    CalibrationRequired,

    #[error("calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit status: 2 for unusable input, 3 for internal or I/O
    /// failures, 1 for a violated contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::InvalidInput(_) => 2,
            Error::Io(_) | Error::QuadratureError(_) | Error::ResidueFailure(_) => 3,
            _ => 1,
        }
    }
}
