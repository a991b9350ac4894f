use std::path::PathBuf;

use crate::chat::ChatError;
use crate::embedding::EmbeddingError;
use crate::generation::GenerationError;
use crate::objectives::ObjectiveError;
use crate::pipeline::RunRecord;
use crate::selection::SelectionError;
use crate::selector::SelectorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("not found: {0}")]
    NotFound(String),
    /// A run failed part-way. `record` holds everything computed before the
    /// failing stage (it has already been persisted when a store is attached).
    #[error("run failed during {stage}: {source}")]
    RunFailed {
        stage: String,
        record: Box<RunRecord>,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error families, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Config,
    Provider,
    Parse,
    Numeric,
    Selection,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Config => 3,
            ErrorCategory::Provider => 4,
            ErrorCategory::Parse => 5,
            ErrorCategory::Numeric => 6,
            ErrorCategory::Selection => 7,
            ErrorCategory::Io => 8,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use crate::generation::RoundFailure;
        match self {
            Error::Embedding(EmbeddingError::DimensionMismatch { .. }) => ErrorCategory::Numeric,
            Error::Embedding(EmbeddingError::NonFinite) => ErrorCategory::Numeric,
            Error::Embedding(_) => ErrorCategory::Provider,
            Error::Objective(_) => ErrorCategory::Numeric,
            Error::Selection(_) => ErrorCategory::Selection,
            Error::Chat(_) => ErrorCategory::Provider,
            Error::Generation(GenerationError::Round { failure, .. }) => match failure {
                RoundFailure::Chat { .. } => ErrorCategory::Provider,
                _ => ErrorCategory::Parse,
            },
            Error::Generation(_) => ErrorCategory::Usage,
            Error::Selector(SelectorError::Chat(_)) => ErrorCategory::Provider,
            Error::Selector(_) => ErrorCategory::Selection,
            Error::Config(_) => ErrorCategory::Config,
            Error::Io { .. } => ErrorCategory::Io,
            Error::Json { .. } => ErrorCategory::Parse,
            Error::NotFound(_) => ErrorCategory::Usage,
            Error::RunFailed { source, .. } => source.category(),
        }
    }
}
