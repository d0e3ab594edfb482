//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("non-positive value at index {index}: {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("all particles have zero weight")]
    ZeroWeightSum,

    #[error("multiplicities sum to {sum}, expected {expected}")]
    MultiplicitySum { sum: usize, expected: usize },

    #[error("index {index} out of range for {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{scheme} does not accept {mode} input")]
    UnsupportedMode { scheme: String, mode: String },

    #[error("unknown selection scheme `{0}`")]
    UnknownScheme(String),

    #[error("exhaustive enumeration supports at most {max} offspring, got {got}")]
    EnumerationTooLarge { max: usize, got: usize },

    #[error("particle collapse at step {step}: every emission weight is zero")]
    ParticleCollapse { step: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("chain is constant: autocorrelation undefined")]
    ConstantChain,

    #[error("window of {window} exceeds chain length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("row {row}: {message}")]
    Ingest { row: usize, message: String },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
