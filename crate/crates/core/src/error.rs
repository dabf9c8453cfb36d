use std::io;

use thiserror::Error;

/// Errors produced by the simulation and detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("table has no rows")]
    EmptyTable,

    #[error("table needs at least 2 breakpoints, got {0}")]
    TooFewBreakpoints(usize),

    #[error("SOC breakpoints must be strictly increasing (row {row}: {prev} then {next})")]
    NonMonotoneBreakpoints { row: usize, prev: f64, next: f64 },

    #[error("SOC breakpoint {0} outside [0, 1]")]
    SocOutOfRange(f64),

    #[error("table value {value} at row {row} is invalid: {reason}")]
    InvalidTableValue {
        row: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("curves share no common SOC range")]
    DisjointRanges,

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("SOC left [0, 1] at t = {t} s (soc = {soc})")]
    SocBounds { t: f64, soc: f64 },

    #[error("fault windows overlap: `{first}` and `{second}`")]
    OverlappingFaults { first: String, second: String },

    #[error("fault `{label}` ends at {t_off} s but the profile ends at {profile_end} s")]
    ProfileTooShort {
        label: String,
        t_off: f64,
        profile_end: f64,
    },

    #[error("samples out of order: t = {next} s after t = {prev} s")]
    OutOfOrder { prev: f64, next: f64 },

    #[error("non-finite sample value at t = {0} s")]
    NonFiniteSample(f64),

    #[error("quantile of an empty sequence")]
    EmptyInput,

    #[error("calibration needs at least {needed} deltas, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("degenerate thresholds: theta- = {theta_minus}, theta+ = {theta_plus}")]
    DegenerateThresholds { theta_minus: f64, theta_plus: f64 },
}

impl Error {
    /// True for filesystem-level failures (as opposed to bad data).
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            Error::Json(e) => e.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}
