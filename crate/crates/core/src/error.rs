use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Invariant,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] io::Error),

    #[error("{format}: malformed header: {reason}")]
    MalformedHeader { format: &'static str, reason: String },

    #[error("{format}: truncated input at byte {offset}")]
    Truncated { format: &'static str, offset: usize },

    #[error("{format}: unsupported version {version}")]
    UnsupportedVersion { format: &'static str, version: u16 },

    #[error("csv: {0}")]
    Csv(String),

    #[error("config: {0}")]
    Config(String),

    #[error("channel length mismatch: channel {channel} has {len} samples, expected {expected}")]
    ChannelLengthMismatch {
        channel: String,
        len: usize,
        expected: usize,
    },

    #[error("annotation [{start}, {end}) out of range for record of {len} samples")]
    AnnotationOutOfRange { start: u64, end: u64, len: usize },

    #[error("annotations overlap or are unsorted at [{start}, {end})")]
    AnnotationOrder { start: u64, end: u64 },

    #[error("missing channel {0}")]
    MissingChannel(String),

    #[error("window [{start}, {end}) out of range for {len} samples")]
    WindowOutOfRange { start: usize, end: usize, len: usize },

    #[error("signal of {len} samples is shorter than one {window}-sample window")]
    SignalTooShort { len: usize, window: usize },

    #[error("class {0} is empty")]
    EmptyClass(&'static str),

    #[error("insufficient windows: need {needed} {class} windows for {purpose}, have {available}")]
    InsufficientWindows {
        class: &'static str,
        purpose: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("backward called without a matching forward pass")]
    MissingForward,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite training loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("teacher model has not been trained")]
    UntrainedTeacher,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("real-time violation: inference {inference_s} s exceeds period {period_s} s")]
    RealTimeViolation { inference_s: f64, period_s: f64 },

    #[error("battery capacity mismatch: {0} mAh vs {1} mAh")]
    CapacityMismatch(f64, f64),

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::Config(_) | Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Invariant,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
