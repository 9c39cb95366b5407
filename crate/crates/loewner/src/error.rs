//! Error taxonomy shared by all modules.
//!
//! Errors are structured so callers (and the CLI) can map them to exit
//! classes: malformed input, domain violations, numeric degeneracy (with the
//! failure location when known), and iteration caps.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (bad file, bad schema, bad shape).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input violates a documented precondition (e.g. curve leaves the
    /// half-plane, marked points out of order, measure not normalized).
    #[error("domain violation: {0}")]
    Domain(String),

    /// A solver hit a numeric degeneracy; `time` is the flow time or
    /// parameter at which it happened, when meaningful.
    #[error("numeric degeneracy in {what}{}", fmt_time(.time))]
    Degeneracy { what: String, time: Option<f64> },

    /// An iterative method exhausted its iteration budget.
    #[error("no convergence in {what} after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

fn fmt_time(t: &Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t:.6}"),
        None => String::new(),
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn degeneracy(what: impl Into<String>, time: Option<f64>) -> Self {
        Error::Degeneracy {
            what: what.into(),
            time,
        }
    }
    pub fn no_convergence(what: impl Into<String>, iterations: usize, residual: f64) -> Self {
        Error::NonConvergence {
            what: what.into(),
            iterations,
            residual,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
