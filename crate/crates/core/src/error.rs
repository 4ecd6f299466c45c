use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid group action: {0}")]
    InvalidAction(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty ensemble: no block with energy <= {cutoff}")]
    EmptyEnsemble { cutoff: f64 },

    #[error("ray selects no block with energy <= {cutoff}")]
    EmptyRay { cutoff: f64 },

    #[error("state index {0} is not part of the barycentric family")]
    UnknownState(usize),

    #[error("operation requires an abelian action")]
    UnsupportedAction,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("symbol frequency ({m}, {n}) aliases at N = {size}")]
    Aliasing { m: i64, n: i64, size: usize },

    #[error("propagator construction failed: {what} residual {residual:.3e} exceeds {tolerance:.1e}")]
    ConstructionFailed {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("operator is not in the span of the algebra (residual {0:.3e})")]
    NotInAlgebra(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
