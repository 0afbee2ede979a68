use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The local Schur block is numerically singular, typically because the
    /// penalty constant is too small.
    #[error("singular local block during assembly (pivot {pivot:e} in column {column})")]
    SingularBlock { column: usize, pivot: f64 },

    #[error("coarse solve diverged: residual grew from {initial:e} to {current:e}")]
    CoarseDivergence { initial: f64, current: f64 },

    #[error("traversal contract violated: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
