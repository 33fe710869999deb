use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("battery capacity error: {0}")]
    Capacity(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("timestamps not strictly increasing at line {line}")]
    Monotonicity { line: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("power flow did not converge after {iterations} iterations (max mismatch {mismatch:.3e} pu)")]
    NonConvergence { iterations: usize, mismatch: f64 },

    #[error("frequency instability at t = {t:.3} s: deviation {deviation_hz:.3} Hz")]
    Instability { t: f64, deviation_hz: f64 },

    #[error("state space too large: {0}")]
    StateSpace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
