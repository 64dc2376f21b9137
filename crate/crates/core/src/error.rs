use thiserror::Error;

/// Errors raised by the geometry, measure and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("point too close to the ideal boundary (|x| = {norm})")]
    NearBoundary { norm: f64 },
    #[error("dimension {dim} not supported: {reason}")]
    UnsupportedDimension { dim: usize, reason: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("boundary functions live on different quadrature grids")]
    GridMismatch,
    #[error("function has zero L2 norm")]
    ZeroFunction,
    #[error("barycenter solver did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("Hessian is numerically singular (eigenvalue ratio {ratio:e})")]
    SingularHessian { ratio: f64 },
    #[error("volume integral tail not converged (relative tail {relative_tail:e})")]
    TailNotConverged { relative_tail: f64 },
    #[error("finite-difference stencil leaves the domain")]
    StencilOutOfDomain,
    #[error("need at least {needed} radii, got {got}")]
    InsufficientRadii { needed: usize, got: usize },
    #[error("no level sets found")]
    NoLevelsFound,
    #[error("frame is degenerate")]
    DegenerateFrame,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
