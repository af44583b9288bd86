use thiserror::Error;

#[derive(Debug, Error)]
pub enum QkError {
    #[error("quaternionic dimension n = {0} is not supported (need n >= 2)")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("metric is not symmetric (relative asymmetry {0:e})")]
    MetricNotSymmetric(f64),

    #[error("metric is not positive definite")]
    MetricNotPositive,

    #[error("admissible basis invariant `{name}` violated: residual {residual:e} > {tol:e}")]
    InvalidBasis { name: &'static str, residual: f64, tol: f64 },

    #[error("point at radius {radius} lies outside the chart domain (radius {domain})")]
    OutsideDomain { radius: f64, domain: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("model self-validation failed: {check} residual {residual:e} exceeds {tol:e}")]
    SelfValidation { check: String, residual: f64, tol: f64 },

    #[error("spectral recovery of the quaternionic structure failed: gap ratio {gap_ratio:e} below {required:e}")]
    SpectralGap { gap_ratio: f64, required: f64 },

    #[error("transport drift {drift:e} exceeds {limit:e}")]
    Drift { drift: f64, limit: f64 },

    #[error("zero reduced scalar curvature: operation needs nu != 0")]
    ZeroScalarCurvature,

    #[error("unknown {what}: `{name}`")]
    Unknown { what: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, QkError>;
