use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TmixError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("teacher geometry is infeasible: Gram matrix has eigenvalue {min_eigenvalue:.3e}")]
    InfeasibleGeometry { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate variance: Q - R^2 = {gap:.3e}")]
    DegenerateVariance { gap: f64 },

    #[error("entropic pole: denominator {denominator:.3e} is not positive")]
    EntropicPole { denominator: f64 },

    #[error("bias equation has no sign change on [-{bound}, {bound}] (trivial classifier regime)")]
    NoBracket { bound: f64 },

    #[error("negative sample weight {0}")]
    NegativeWeight(f64),

    #[error("every grid cell failed for criterion {0}")]
    AllCellsFailed(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TmixError {
    fn from(err: std::io::Error) -> Self {
        TmixError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for TmixError {
    fn from(err: serde_json::Error) -> Self {
        TmixError::Format(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TmixError>;
