use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh mismatch: {left}x{left} vs {right}x{right}")]
    MeshMismatch { left: usize, right: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("requested {requested} modes but the discrete solenoidal subspace has dimension {available}")]
    Capacity { requested: usize, available: usize },

    #[error("{what} did not converge (residual {residual:e})")]
    Numerical { what: String, residual: f64 },

    #[error("CFL violation: dt = {dt:e} exceeds the admissible step {admissible:e}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("convection tensor skew violation {violation:e} exceeds {limit:e}")]
    SkewViolation { violation: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
