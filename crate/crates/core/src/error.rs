use thiserror::Error;

/// Errors produced by the tensor-train kernels, model builders and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("tensor is not in the required orthogonal form: {0}")]
    NotOrthogonal(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed TTF1 data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
