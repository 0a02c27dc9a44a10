use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FkError {
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("field is not defined on the support needed around site {site:?}")]
    InsufficientSupport { site: Vec<i64> },

    #[error("period mismatch: {0}")]
    PeriodMismatch(String),

    #[error("periods must be >= 1 (got {0:?})")]
    InvalidPeriods(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step rejected after repeated halving (smallest dt tried {dt:e})")]
    StepRejected { dt: f64 },

    #[error("non-finite value encountered during {0}")]
    NonFinite(&'static str),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("node collapse: adjacent path nodes {index} and {next} closer than {tol:e}", next = index + 1)]
    NodeCollapse { index: usize, tol: f64 },

    #[error("saddle refinement failed: residual {residual:e} above {tol:e}")]
    SaddleNotIsolated { residual: f64, tol: f64 },

    #[error("no gap pair found: {0}")]
    NoGap(String),

    #[error("window cap {cap} reached with tail bound {tail:e}")]
    WindowCap { cap: usize, tail: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, FkError>;
