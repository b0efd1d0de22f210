use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix exponential overflow (1-norm {norm:e})")]
    Overflow { norm: f64 },

    #[error("covariance not positive definite at transition {index}")]
    IndefiniteCovariance { index: usize },

    #[error("flow evaluation failed at transition {index}")]
    FlowFailure { index: usize },

    #[error("path left the admissible domain at step {step}")]
    Divergence { step: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("quadrature did not converge (estimated error {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}
