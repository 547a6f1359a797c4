use thiserror::Error;

use crate::transport_nd::MongeAmpereSolution;

/// Errors raised by the numerical kernels and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input field has zero mass after clamping negatives")]
    AllZeroInput,
    #[error("mass mismatch: {0}")]
    MassMismatch(String),
    #[error("weight must be strictly positive (min value {0:e})")]
    NonpositiveWeight(f64),
    #[error("operator symbol is numerically singular (|A| = {0:e})")]
    SingularSymbol(f64),
    #[error("target density vanishes at a mapped point (g = {0:e})")]
    DegenerateTarget(f64),
    #[error("matrix is not symmetric positive definite")]
    NonSpd,
    #[error("Monge-Ampere iteration did not converge (residual {:e} after {} iterations)", .0.residual, .0.diagnostics.iterations)]
    NoConvergence(Box<MongeAmpereSolution>),
    #[error("adjoint operator is singular beyond its constant nullspace: {0}")]
    SingularAdjoint(String),
    #[error("translated support leaves the domain")]
    SupportOverflow,
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
