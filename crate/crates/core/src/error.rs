use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("characteristics cross between nodes {index} and {next}: y decreases by {drop:e}")]
    NonMonotoneCharacteristic {
        index: usize,
        next: usize,
        drop: f64,
    },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("time step underflow at t = {t}: dt = {dt:e} is below the minimum")]
    DtUnderflow { t: f64, dt: f64 },

    #[error("peakon positions not strictly increasing at index {index}")]
    OrderingViolated { index: usize },

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;
