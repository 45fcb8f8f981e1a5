use thiserror::Error;

/// Errors raised by the simulation library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resource cap exceeded: {what} reached {cap}")]
    ResourceCap { what: &'static str, cap: u64 },

    #[error("unreliable calibration: only {exceedances} exceedances at the solved point (need {required})")]
    Calibration { exceedances: usize, required: usize },

    #[error("series for E_{alpha}({z}) cannot reach the requested precision")]
    PrecisionUnreachable { alpha: f64, z: f64 },

    #[error("step function never exceeds level {0}: no finite generalized inverse")]
    NoFiniteInverse(f64),

    #[error("truncation tolerance {tol} unachievable within {cap} jumps")]
    ToleranceUnreachable { tol: f64, cap: usize },

    #[error("insufficient exceedances: got {got}, need {need}")]
    InsufficientExceedances { got: usize, need: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("Monte Carlo bank missing for {0}")]
    BankMissing(&'static str),

    #[error("{failed} of {total} replications failed; first failure: {first}")]
    Replications {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
