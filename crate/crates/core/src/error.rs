use alloc::string::String;

/// Errors raised by the solvers and estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs failed validation before a solve.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The explicit scheme would lose monotonicity.
    #[error(
        "monotonicity condition violated at time index {time_index}: dt = {dt:e} exceeds the stable bound {required_dt:e}"
    )]
    Stability { time_index: usize, dt: f64, required_dt: f64 },

    /// A time requested by the caller is not a node of the grid.
    #[error("time {time} is not a node of the grid (t0 = {t0}, dt = {dt})")]
    OffGrid { time: f64, t0: f64, dt: f64 },

    /// Two surfaces that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;
