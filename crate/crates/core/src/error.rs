use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: f64, got: f64 },
    #[error("zero-power attack")]
    ZeroPowerAttack,
    #[error("undefined ASR: no originally-correct predictions")]
    UndefinedAsr,
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("malformed file: field `{field}`: {reason}")]
    Format { field: String, reason: String },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("non-finite attack loss at epoch {epoch}, example {example}")]
    NonFiniteLoss { epoch: usize, example: usize },
    #[error("config: field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("missing artifact {path}: run `{command}` first")]
    MissingArtifact { path: PathBuf, command: String },
    #[error("config hash mismatch in {path}: expected {expected}, found {found}")]
    HashMismatch { path: PathBuf, expected: String, found: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-parsable category used by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptySignal
            | Error::NonFinite(_)
            | Error::InvalidSampleRate(_)
            | Error::LengthMismatch { .. }
            | Error::SampleRateMismatch { .. }
            | Error::ZeroPowerAttack
            | Error::InvalidArgument { .. } => "invalid-input",
            Error::UndefinedAsr => "undefined-metric",
            Error::Format { .. } | Error::UnsupportedEncoding(_) | Error::Json(_) | Error::Csv(_) => {
                "format"
            }
            Error::Diverged { .. } | Error::NonFiniteLoss { .. } => "numerical",
            Error::Config { .. } => "config",
            Error::MissingArtifact { .. } => "missing-artifact",
            Error::HashMismatch { .. } => "hash-mismatch",
            Error::Io { .. } => "io",
        }
    }
}
