use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("non-finite value {value} at t = {t}")]
    NonFinite { t: f64, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: worst subinterval [{a}, {b}] with error estimate {err:e}")]
    QuadratureNonConvergence { a: f64, b: f64, err: f64 },

    #[error("t = {t} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("solution is not defined at t = {t}: blow-down at {blowdown}")]
    PastBlowdown { t: f64, blowdown: f64 },

    #[error("integral over [0, inf) is {verdict}, a convergent value is required")]
    NotConvergent { verdict: &'static str },

    #[error("improper integral verdict is inconclusive (last horizon {horizon})")]
    Inconclusive { horizon: f64 },

    #[error("step limit of {max_steps} reached at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("feasibility is not monotone in k: {0}")]
    NotMonotone(String),

    #[error("particular solution check failed at t = {t}: {reason}")]
    ParticularSolution { t: f64, reason: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
