use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not Schur stable (spectral radius estimate {radius})")]
    NotStable { radius: f64 },

    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constraint row {row} has a non-positive shifted bound {bound}")]
    DegenerateConstraint { row: usize, bound: f64 },

    #[error("no invariant ellipsoid found for any contraction factor in the grid")]
    NoInvariantSet,

    #[error("closed-loop log is empty")]
    EmptyLog,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("offline cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
