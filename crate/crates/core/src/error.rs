use thiserror::Error;

use crate::drift::AdmissibilityReport;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {z} outside the moment interval [{lo}, {hi}]")]
    OutOfDomain { z: f64, lo: f64, hi: f64 },

    #[error("cumulant derivative of order {0} is not supported (max 3)")]
    UnsupportedOrder(u32),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("path sampling not supported for {0}")]
    SamplingUnsupported(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("grid too coarse: estimated relative error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("shift by {shift} is not a multiple of the grid spacing {dx}")]
    NonAlignedShift { shift: f64, dx: f64 },

    #[error("check violated: {0}")]
    ViolationDetected(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("volatility of driver {driver} is not admissible")]
    InadmissibleVolatility {
        driver: usize,
        report: Box<AdmissibilityReport>,
    },

    #[error("dyadic level {level} exceeds the configured cap {cap}")]
    LevelTooDeep { level: u32, cap: u32 },

    #[error("maturity {tau} beyond the curve grid (x_max = {x_max})")]
    MaturityBeyondGrid { tau: f64, x_max: f64 },

    #[error("{failed} of {total} paths failed, above the 10% limit; first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
