//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library surface.
///
/// [`Error::code`] yields a stable machine-readable name for each variant;
/// the CLI emits these codes in its error JSON.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains NaN or infinite entries")]
    NonFiniteInput,

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("sample rates differ: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: f64, b: f64 },

    #[error("need at least {needed} R-peaks, got {got}")]
    InsufficientPeaks { needed: usize, got: usize },

    #[error("invalid period {period} for segment length {len}")]
    InvalidPeriod { period: usize, len: usize },

    #[error("no R-peaks found in segment")]
    NoPeaksFound,

    #[error("finite-difference step must be positive and finite")]
    InvalidStep,

    #[error("quadrature step count must be at least 1")]
    InvalidSteps,

    #[error("non-finite value encountered while evaluating the model along the path")]
    NonFiniteGradient,

    #[error("pairwise alignment scores cancel; no stable normalization exists")]
    DegenerateAlignment,

    #[error("threshold fraction {0} outside (0, 1)")]
    InvalidThreshold(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("lead not found: {0}")]
    LeadNotFound(String),

    #[error("malformed CSV: {0}")]
    CsvFormat(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier for machine-readable error reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFiniteInput => "NonFiniteInput",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::SampleRateMismatch { .. } => "SampleRateMismatch",
            Error::InsufficientPeaks { .. } => "InsufficientPeaks",
            Error::InvalidPeriod { .. } => "InvalidPeriod",
            Error::NoPeaksFound => "NoPeaksFound",
            Error::InvalidStep => "InvalidStep",
            Error::InvalidSteps => "InvalidSteps",
            Error::NonFiniteGradient => "NonFiniteGradient",
            Error::DegenerateAlignment => "DegenerateAlignment",
            Error::InvalidThreshold(_) => "InvalidThreshold",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidModel(_) => "InvalidModel",
            Error::LeadNotFound(_) => "LeadNotFound",
            Error::CsvFormat(_) => "CsvFormat",
            Error::Csv(_) => "CsvError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
