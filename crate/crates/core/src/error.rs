use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("format error in {context} at offset {offset}: {message}")]
    Format {
        context: String,
        offset: u64,
        message: String,
    },

    #[error("duplicate keyword {text:?} at line {line}")]
    DuplicateKeyword { line: usize, text: String },

    #[error("generation exhausted: {0}")]
    GenerationExhausted(String),

    #[error("unknown id {0}")]
    UnknownId(u64),

    #[error("text not present in ground truth: {0:?}")]
    UnknownText(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("artifact consistency: {0}")]
    Consistency(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(context: impl Into<String>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            offset,
            message: message.into(),
        }
    }
}
