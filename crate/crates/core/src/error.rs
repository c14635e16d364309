use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: missing required field `{field}`")]
    MissingField {
        path: PathBuf,
        line: usize,
        field: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("unknown sample id `{0}` referenced by sidecar manifest")]
    UnknownSample(String),

    #[error("missing sidecar artifacts ({kind}): {}", .keys.join(", "))]
    MissingSidecars { kind: String, keys: Vec<String> },

    #[error("lexicon `{name}` not found at {path}")]
    MissingLexicon { name: String, path: PathBuf },

    #[error("invalid label file {path}: {message}")]
    Labels { path: PathBuf, message: String },

    #[error("cycle in dependency heads of sentence {0}")]
    HeadCycle(String),

    #[error("undefined similarity: zero vector")]
    UndefinedSimilarity,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance")]
    ZeroVariance,

    #[error("misaligned rows: {0}")]
    Misaligned(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (bad paths, malformed files,
    /// bad configuration) rather than an internal failure.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Csv(_))
    }
}
