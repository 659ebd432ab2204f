use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("row {row}: unknown event kind `{kind}`")]
    UnknownEventKind { row: usize, kind: String },

    #[error("invalid column map: {0}")]
    ColumnMap(String),

    #[error("no units for player {player} ({metric})")]
    EmptySeries { player: String, metric: String },

    #[error("transcript has no recognizable speaker markers")]
    NoMarkers,

    #[error("transcript header is missing `{0}`")]
    MissingHeader(&'static str),

    #[error("cannot merge interviews: {0}")]
    Merge(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("singular design matrix: column `{column}` is collinear with {others:?}")]
    SingularDesign { column: String, others: Vec<String> },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {reason}")]
    Record { path: String, line: usize, reason: String },

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors raised before any work starts (bad config, missing inputs).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::MissingPath(_) | Error::ColumnMap(_) | Error::InvalidParameter(_) => true,
            Error::Stage { source, .. } | Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
