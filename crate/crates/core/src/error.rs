use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::design::ParseDesignError;

/// Errors raised by the library outside of calibration loading and design parsing.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Calibration(#[from] CalibrationError),

    #[error(transparent)]
    Parse(#[from] ParseDesignError),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("pressure {pressure} kPa is outside the covered range [{min}, {max}] kPa of the {branch} branch of {kind}")]
    Extrapolation {
        kind: String,
        branch: &'static str,
        pressure: f64,
        min: f64,
        max: f64,
    },

    #[error("unreachable: {0}")]
    Unreachable(String),

    #[error("enumeration of n = {n} units exceeds the guard limit of {limit}; pass an explicit override")]
    Guard { n: usize, limit: usize },

    #[error("invalid search parameters: {0}")]
    InvalidSearch(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
