use thiserror::Error;

/// Errors raised by the analytic and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parts sum to {actual}, expected {expected}")]
    PartsSumMismatch { expected: u64, actual: u64 },

    #[error("composition has {len} parts, expected {colors}")]
    CompositionLength { colors: u32, len: usize },

    #[error("pack spec needs at least one color")]
    NoColors,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(String),

    #[error("expectation diverges for match probability 0")]
    ZeroMatchProbability,

    #[error("{what}: {size} exceeds the configured ceiling {ceiling}")]
    ResourceLimit {
        what: &'static str,
        size: String,
        ceiling: String,
    },

    #[error("series did not reach tolerance {tol:e} within {terms} terms")]
    NotConverged { tol: f64, terms: u64 },

    #[error("survival index {m} exceeds the spectrum's highest power {max_power}")]
    PowerOutOfRange { m: u64, max_power: u64 },

    #[error(
        "precision alarm at m = {m}: error estimate {estimate:e} exceeds threshold {threshold:e}"
    )]
    PrecisionAlarm {
        m: u64,
        estimate: f64,
        threshold: f64,
    },

    #[error("pack-size distribution: {0}")]
    Distribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
