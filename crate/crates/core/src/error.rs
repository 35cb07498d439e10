use thiserror::Error;

use crate::families::FamilyTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not Hermitian (asymmetry {residual:.3e} exceeds {bound:.3e})")]
    NotHermitian { residual: f64, bound: f64 },

    #[error("eigensolver did not converge (residual {residual:.3e})")]
    ConvergenceFailure { residual: f64 },

    #[error("Singular: pivot {pivot} has magnitude {magnitude:.3e}")]
    Singular { pivot: usize, magnitude: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("frame of dimension {frame} does not match matrix of dimension {matrix}")]
    FrameMismatch { frame: usize, matrix: usize },

    #[error("family {family}: {constraint}")]
    BadDimension {
        family: FamilyTag,
        constraint: &'static str,
    },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("family {0} has no sign operator (no l <-> -l pairing in its adapted basis)")]
    NoSignOperator(FamilyTag),

    #[error("compression at rank {rank} is singular")]
    SingularCompression { rank: usize },

    #[error("invalid Schatten exponent {0}: must be >= 1")]
    InvalidSchattenExponent(f64),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err.to_string())
    }
}
