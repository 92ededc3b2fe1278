use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {message}")]
    Dimension { op: &'static str, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("utterance {utterance}, position {position}: {message}")]
    InvalidIob {
        utterance: usize,
        position: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("not found: {0}")]
    Lookup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("function is not deterministic: {first} != {second}")]
    Determinism { first: f64, second: f64 },

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

    pub(crate) fn dim(op: &'static str, message: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            message: message.into(),
        }
    }

    /// True for errors caused by the filesystem rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
