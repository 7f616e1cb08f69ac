use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("resolution {got} too small, need at least {need}")]
    ResolutionTooSmall { need: usize, got: usize },

    #[error("field has nonzero mean {mean:e} (tolerance {tol:e})")]
    MeanNotZero { mean: f64, tol: f64 },

    #[error("invalid epsilon {0}: 1/epsilon must be a positive integer")]
    InvalidEpsilon(f64),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("exponential fit failed: {0}")]
    FitFailed(String),

    #[error("noise truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("negative radicand {0:e}")]
    NegativeRadicand(f64),

    #[error("unstable step: amplitude {amplitude:e} at t = {t}")]
    UnstableStep { amplitude: f64, t: f64 },

    #[error("stationary variance undefined for the zero mode")]
    ZeroMode,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
