use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("ray exits immediately")]
    RayExitsImmediately,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter {field}: {message}")]
    InvalidParameter { field: &'static str, message: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("node at the pole (r = 0)")]
    NodeAtPole,
    #[error("accretivity violated: smallest eigenvalue of the symmetric fractional part is {lambda_min:.6e}; increase rho")]
    AccretivityViolated { lambda_min: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {0:.6e})")]
    NotPositiveDefinite(f64),
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is singular to working precision (condition estimate {0:.3e})")]
    Singular(f64),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("{0}")]
    Spectrum(String),
    #[error("config validation failed: {0}")]
    Config(String),
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(field: &'static str, message: impl Into<String>) -> Error {
    Error::InvalidParameter { field, message: message.into() }
}
