use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{kind} has no derivative of order {order} at {x0}")]
    UnsupportedOrder { kind: String, order: usize, x0: f64 },

    #[error("no grid point gives a Taylor coefficient of order {order} above 1e-12 in magnitude")]
    NoNonzeroCoefficient { order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("density has zero mass on the quadrature grid")]
    ZeroMass,

    #[error("construction is ill-conditioned (residual {residual:.3e} > tolerance {tolerance:.3e})")]
    IllConditioned { residual: f64, tolerance: f64 },

    #[error("scale parameter must be positive, got {0}")]
    DegenerateScale(f64),

    #[error("architecture too small: {0}")]
    ArchitectureTooSmall(String),

    #[error("step size fell below h_min = {h_min:e} at t = {t}")]
    StepSizeUnderflow { t: f64, h_min: f64 },

    #[error("step budget of {0} exhausted before reaching the horizon")]
    StepBudgetExhausted(usize),

    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),

    #[error("all reference values are zero")]
    AllZeroReference,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
