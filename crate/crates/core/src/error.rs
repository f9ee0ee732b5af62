use thiserror::Error;

/// Errors raised by estimators, statistics and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    /// A unit with an observed failure has an estimated censoring survival of zero.
    #[error("degenerate IPCW weight: censoring survival is zero at uncensored time {time}")]
    DegenerateWeight { time: f64 },

    #[error("censored-exponential MLE undefined: no uncensored observations")]
    UndefinedMle,

    #[error("degenerate chi-square cell {cell}: estimated probability is zero")]
    DegenerateCell { cell: usize },

    #[error("Kaplan-Meier estimator has no jumps (all observations censored)")]
    ZeroJump,

    #[error("tail-domain error: vanishing at-risk probability at u = {u}")]
    TailDomain { u: f64 },

    #[error("degenerate variance estimate")]
    DegenerateVariance,

    #[error("bootstrap degenerate: {skipped} of {total} iterations failed")]
    BootstrapDegenerate { skipped: usize, total: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config schema error: {msg} (valid keys: {valid})")]
    Schema { msg: String, valid: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
