//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("attribute {name} = {value} outside configured range [{lo}, {hi}]")]
    OutOfRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate render: glyph rasterized to {lit} lit pixels (need >= {min})")]
    DegenerateRender { lit: usize, min: usize },

    #[error("data format error in {path} at offset {offset}: {reason}")]
    DataFormat {
        path: String,
        offset: u64,
        reason: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("triplet contract violated: {0}")]
    TripletContract(String),

    #[error("non-finite value in loss term '{term}' at step {step}")]
    NonFinite { term: String, step: u64 },

    #[error("undefined orientation: {0}")]
    UndefinedOrientation(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: distinct codes per failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfRange { .. } => 2,
            Error::DataFormat { .. } => 3,
            Error::NonFinite { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
