use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A singular low-frequency weight met a field with nonzero mean.
    #[error("zero mode must vanish (found |u(0)| = {0:e})")]
    NonzeroMean(f64),

    #[error(
        "trajectory window too short: need [{need_from}, {need_to}], have [{have_from}, {have_to}]"
    )]
    WindowTooShort {
        need_from: f64,
        need_to: f64,
        have_from: f64,
        have_to: f64,
    },

    #[error("numerical blow-up at t = {time}: L2 norm grew from {initial:e} to {current:e}")]
    BlowUp {
        time: f64,
        initial: f64,
        current: f64,
    },

    #[error("empty sample set")]
    EmptySample,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(msg()))
    }
}
