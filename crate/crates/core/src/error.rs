//! Error taxonomy shared by all modules.

use crate::state::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: x range [{x_min}, {x_max}], y range [{y_min}, {y_max}]")]
    InvalidDomain {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },

    #[error("grid needs at least 2 elements per axis (no interior dof otherwise), got nx={nx}, ny={ny}")]
    GridTooCoarse { nx: usize, ny: usize },

    #[error(
        "ellipticity violation at ({x:.6}, {y:.6}): lambda_min(sym a) = {found:.6e} < declared {declared:.6e}"
    )]
    EllipticityViolation {
        x: f64,
        y: f64,
        found: f64,
        declared: f64,
    },

    #[error("non-finite coefficient value {value} at ({x:.6}, {y:.6})")]
    NonFiniteCoefficient { x: f64, y: f64, value: f64 },

    #[error("reaction coefficient must be nonnegative, node {index} has value {value:.6e}")]
    MonotonicityViolation { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular factorization: zero pivot in column {column} (largest candidate {pivot:.3e})")]
    SingularFactorization { column: usize, pivot: f64 },

    #[error("linear solve residual {residual:.3e} exceeds contract bound {bound:.3e}")]
    LinearSolveInaccurate { residual: f64, bound: f64 },

    #[error("Krylov solver did not converge in {iterations} iterations, residual {residual:.3e}")]
    KrylovDidNotConverge { iterations: usize, residual: f64 },

    #[error("state solve did not converge: {report}")]
    StateSolveFailed { report: SolveReport },

    #[error(
        "truncation level {level:.3e} is active at convergence (|y|_inf = {norm_inf:.3e}); retry with a larger level"
    )]
    TruncationActive { level: f64, norm_inf: f64 },

    #[error("second derivative unavailable: {0}")]
    NotTwiceDifferentiable(String),

    #[error("invalid bounds: alpha = {alpha} must be strictly below beta = {beta}")]
    InvalidBounds { alpha: f64, beta: f64 },

    #[error("eigenvalue solve failed: {0}")]
    EigenSolveFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
