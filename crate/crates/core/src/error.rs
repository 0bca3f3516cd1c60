use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 16")]
    GridSize(usize),

    #[error("grid half-length must be positive and finite, got {0}")]
    HalfLength(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("soliton speed must be positive and finite, got {0}")]
    Speed(f64),

    #[error("weight a = {a} outside (0, sqrt(c/3)) for c = {c}")]
    Weight { a: f64, c: f64 },

    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),

    #[error("one-sided semigroup evaluated at negative time {0}")]
    NegativeTime(f64),

    #[error("ill-conditioned {what} system (condition number {condition:.3e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("non-finite values after step at t = {t} (blow-up or instability)")]
    NonFinite { t: f64 },

    #[error("modulation constraint drift {ratio:.3e} exceeds {limit:.1e}")]
    ConstraintDrift { ratio: f64, limit: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
