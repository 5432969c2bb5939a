use thiserror::Error;

/// Errors raised by the simulator pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out-of-order spike on channel {channel}: {timestamp} < {last}")]
    Ordering {
        channel: usize,
        timestamp: f64,
        last: f64,
    },

    #[error("model is not trained")]
    NotTrained,

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("configuration error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("degenerate variance: samples are identical")]
    DegenerateVariance,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
