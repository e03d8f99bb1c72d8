use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("finesse must exceed 1: tooth width {width_hz} Hz is not below tooth spacing {spacing_hz} Hz")]
    Finesse { width_hz: f64, spacing_hz: f64 },

    #[error("grid too coarse: resolution {resolution_hz} Hz exceeds tooth_width/8 = {limit_hz} Hz")]
    GridTooCoarse { resolution_hz: f64, limit_hz: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("echo window [{start_s:e}, {end_s:e}] s contains the transmitted pulse at t = 0")]
    WindowContainsTransmitted { start_s: f64, end_s: f64 },

    #[error("windows overlap: {0}")]
    WindowOverlap(String),

    #[error(
        "time bins overlap: packet duration {duration_s:e} s is not below half the bin separation {separation_s:e} s"
    )]
    BinOverlap { duration_s: f64, separation_s: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("search did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
