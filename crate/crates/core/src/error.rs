use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain ({a}, {b}): endpoints must be finite with a < b")]
    InvalidDomain { a: f64, b: f64 },

    #[error("mesh must have at least one element")]
    EmptyMesh,

    #[error("unsupported Gauss rule with {0} points (supported: 1..=5)")]
    QuadratureOrder(usize),

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("linear solve failed: relative residual {residual:e}")]
    SolverFailure { residual: f64 },

    #[error("custom basis is not G-orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("invalid integrand: {0}")]
    InvalidIntegrand(String),

    #[error("invalid g: {0}")]
    InvalidG(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("radius too large: r = {r} exceeds c(lambda_min) = {c_min}")]
    RadiusTooLarge { r: f64, c_min: f64 },

    #[error("inconclusive solve: {0}")]
    Inconclusive(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
