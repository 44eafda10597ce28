use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("subject {subject}, task {task}: {message}")]
    Load {
        subject: String,
        task: u8,
        message: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("length mismatch: {left} vs {right}")]
    Alignment { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("cohort `{cohort}`: {message}")]
    Cohort { cohort: String, message: String },

    #[error("model format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Manifest(_) => "manifest",
            Error::Load { .. } => "load",
            Error::Degenerate(_) => "degenerate",
            Error::Alignment { .. } => "alignment",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::UnknownFunctional(_) => "unknown_functional",
            Error::SingleClass(_) => "single_class",
            Error::Cohort { .. } => "cohort",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
