use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the preprocessing, training and evaluation
/// pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("missing channel {0:?}")]
    MissingChannel(String),

    #[error("{count} event(s) truncated by the end of the recording")]
    EventTruncated { count: usize },

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("invalid winsorize percentiles: {0}")]
    InvalidPercentiles(String),

    #[error("resampling from {from_hz} Hz up to {to_hz} Hz is not supported")]
    UpsampleUnsupported { from_hz: f64, to_hz: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("epoch too short: {got} output samples, need {need}")]
    ShortEpoch { got: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("class {label} has {count} example(s), need at least 2")]
    DegenerateClass { label: bool, count: usize },

    #[error("covariance is singular even after shrinkage")]
    SingularCovariance,

    #[error("solver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("unknown classifier family {0:?}")]
    UnknownFamily(String),

    #[error("unknown montage {0:?}")]
    UnknownMontage(String),

    #[error("need at least {k} sequences for {k}-fold cross validation, got {got}")]
    TooFewSequences { k: usize, got: usize },

    #[error("invalid fold count {0}, need k >= 2")]
    InvalidFoldCount(usize),

    #[error("incomplete sequence {sequence}: class {class} has {available} trial(s), need {requested}")]
    IncompleteSequence {
        sequence: u64,
        class: u8,
        available: usize,
        requested: usize,
    },

    #[error("empty request: {0}")]
    EmptyRequest(String),

    #[error("malformed speller block {block}: {reason}")]
    MalformedSpellerBlock { block: u64, reason: String },

    #[error("invalid synthetic session spec: {0}")]
    InvalidSynthSpec(String),

    #[error("invalid calibration target {0}")]
    InvalidCalibrationTarget(f64),

    #[error("calibration failed: {0}")]
    NonMonotoneEstimate(String),

    #[error("unsupported format version {found:?}")]
    FormatVersionUnsupported { found: String },

    #[error("malformed header at line {line}: {message}")]
    MalformedHeader { line: usize, message: String },

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("schema mismatch: field {field:?}: {message}")]
    SchemaMismatch { field: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
