use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative density {value} at cell ({i}, {j})")]
    NegativeDensity { i: usize, j: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("scheme failure at t = {t}: {reason}")]
    SchemeFailure { t: f64, reason: String },

    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },

    #[error("iteration limit reached after {iterations} iterations (relative residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("compatibility violated: |mean| = {mean:e} exceeds tolerance (L2 norm {norm:e})")]
    Compatibility { mean: f64, norm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sigma selection failed at sigma = {sigma:e}: {reason}")]
    SelectionFailure { sigma: f64, reason: String },

    #[error("diagnostics sink failed: {0}")]
    Sink(String),

    #[error("internal error: {0}")]
    Internal(String),
}
