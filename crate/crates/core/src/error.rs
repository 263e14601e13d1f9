use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tail growth {growth} is not integrable against a kernel of order {sigma}")]
    DivergentTail { growth: f64, sigma: f64 },

    #[error("stencil of order {order} at x = {x} leaves the grid")]
    OutOfStencil { x: f64, order: usize },

    #[error("point {x} lies outside the admissible domain ({reason})")]
    OutOfDomain { x: f64, reason: &'static str },

    #[error("kernel evaluated at y = 0")]
    SingularArgument,

    #[error("kernel is not Hölder continuous away from the origin: {0}")]
    NonHolderKernel(String),

    #[error("order {order} is an integer")]
    IntegerOrder { order: f64 },

    #[error("invalid measure: {0}")]
    BadMeasure(String),

    #[error("assembled row {row} is not strictly diagonally dominant")]
    NonDominantMatrix { row: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("fixed-point map is not a contraction (measured factor {factor})")]
    NoContraction { factor: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
