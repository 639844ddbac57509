use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution has mass {mass:e} on the truncation interval [{a}, {b}]")]
    ZeroMass { mass: f64, a: f64, b: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("weight must be positive, got {0}")]
    NonPositive(f64),
    #[error("density {rho:e} at interior node x = {x} is too small to divide by")]
    DivisionBlowup { x: f64, rho: f64 },
    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),
    #[error("mass matrix is not positive definite near x = {0}")]
    MassNotSpd(f64),
    #[error("point {x} lies outside the support [{a}, {b}]")]
    OutOfSupport { x: f64, a: f64, b: f64 },
    #[error("regression problem is degenerate: {0}")]
    Degenerate(String),
    #[error("design data carries no gradient values")]
    MissingGradients,
    #[error("expansion has zero variance")]
    ZeroVariance,
    #[error("model evaluated outside its domain: {0}")]
    DomainError(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
