use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] crate::expr::ParseError),

    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("tensor slot {slot} out of range for arity {arity}")]
    SlotOutOfRange { slot: usize, arity: usize },

    #[error("tensor slot {slot} is already {direction}")]
    SlotDirection { slot: usize, direction: &'static str },

    #[error("conformal weight mismatch: {left} vs {right}")]
    WeightMismatch { left: i32, right: i32 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("metric is not positive definite")]
    NotPositiveDefinite,

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefiniteAt { point: Vec<f64> },

    #[error("two-form has support outside the mixed block (max pure-block entry {magnitude:.3e})")]
    NotMixedBlock { magnitude: f64 },

    #[error("chart field `{field}` may depend only on {allowed}, found x{var}")]
    FactorDependence {
        field: String,
        allowed: String,
        var: usize,
    },

    #[error("chart block `{field}` is not symmetric: entry ({i},{j}) differs from ({j},{i})")]
    BlockNotSymmetric { field: String, i: usize, j: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("relaxation factor omega must lie in (0, 2), got {0}")]
    OmegaOutOfRange(f64),

    #[error("grid shape {shape:?} too small: every axis needs at least {min} nodes")]
    BadGridShape { shape: [usize; 4], min: usize },

    #[error("grid spacing must be positive and finite, got {0:?}")]
    BadGridSpacing([f64; 4]),

    #[error("point {point:?} lies outside the grid domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("grid file: {0}")]
    BadGridFile(String),

    #[error("non-finite values encountered during {0}")]
    NonFinite(String),

    #[error("path must contain at least two points")]
    EmptyPath,

    #[error("transport step size is not positive")]
    BadStepSize,

    #[error("{0}")]
    Unsupported(String),
}
