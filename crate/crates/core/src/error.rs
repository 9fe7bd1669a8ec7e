use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("waveform is invalid: {0}")]
    InvalidWaveform(String),

    #[error("standard deviation {std:e} is below tolerance; constant input cannot be standardized")]
    ZeroVariance { std: f64 },

    #[error("value range {range:e} is below tolerance; constant input cannot be min-max scaled")]
    ZeroRange { range: f64 },

    #[error("invalid normalization spec: {0}")]
    InvalidNormalization(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("mark index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid label config: {0}")]
    InvalidLabelConfig(String),

    #[error("time-scale factor {0} outside [0.5, 2.0]")]
    FactorOutOfRange(f64),

    #[error("segment of length {len} is shorter than required {required}")]
    SegmentTooShort { len: usize, required: usize },

    #[error("gain must be positive, got {0}")]
    NonPositiveGain(f64),

    #[error("invalid augmentation spec: {0}")]
    InvalidAugmentSpec(String),

    #[error("invalid synthesis spec: {0}")]
    SpecInvalid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input length {0} does not propagate to a valid architecture")]
    UnsupportedInputLen(usize),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error("marks must be sorted ascending")]
    UnsortedInput,

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
