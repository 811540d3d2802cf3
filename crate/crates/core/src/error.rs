use thiserror::Error;

use crate::quadrature::QuadratureError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("evaluation time {s} precedes conditioning time {t0}")]
    TimeOrder { t0: f64, s: f64 },
    #[error("mean function evaluated outside its domain at t = {0}")]
    OutsideDomain(f64),
    #[error("time grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("horizon shorter than transit time (T = {horizon} <= 1/lambda = {transit})")]
    HorizonTooShort { horizon: f64, transit: f64 },
    #[error("schedule misaligned with grid: {0}")]
    Misaligned(String),
    #[error("cannot step past the horizon (step {0})")]
    PastHorizon(usize),
    #[error("no demand value at update time {0}")]
    MissingUpdateValue(f64),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("path {index} failed: {source}")]
    Path { index: usize, source: Box<Error> },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error stems from invalid input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Solver(_) | Error::Quadrature(_) => false,
            Error::Path { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
