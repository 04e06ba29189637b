use thiserror::Error;

/// Errors raised by the tracking engine and its supporting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bounding box ({x}, {y}, {w}, {h})")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite measurement")]
    NonFiniteMeasurement,

    #[error("frame index regression: got {got}, last processed {last}")]
    FrameRegression { got: u32, last: u32 },

    #[error("detection frame {got} does not match step frame {expected}")]
    FrameMismatch { got: u32, expected: u32 },

    #[error("negative time gap: current frame {current} precedes sample frame {sample}")]
    NegativeTimeGap { current: u32, sample: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("detection source does not belong to region {roi}")]
    RegionMismatch { roi: u32 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{context}: {msg}")]
    Io { context: String, msg: String },

    #[error("metric undefined: {0}")]
    Undefined(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, err: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            msg: err.to_string(),
        }
    }
}
