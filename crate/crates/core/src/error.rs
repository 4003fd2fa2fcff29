use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("token {token_id} references unknown type {type_id}")]
    DanglingTypeReference { token_id: String, type_id: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid lexeme structure for `{lexeme_id}`: {reason}")]
    InvalidLexeme { lexeme_id: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {found}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: Option<String>,
    },

    #[error("{path}:{line}: cannot parse `{token}` as a float")]
    UnparsableFloat {
        path: PathBuf,
        line: u64,
        token: String,
    },

    #[error("non-finite value in {0}")]
    NonFiniteInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("signal is empty")]
    EmptySignal,

    #[error("chunk of {len} samples is shorter than one analysis window ({window} samples)")]
    ChunkTooShort { len: usize, window: usize },

    #[error("cannot read audio {path}: {reason}")]
    AudioReadFailure { path: PathBuf, reason: String },

    #[error("token {token_id} has {n_chunks} chunks, more than the configured maximum {max_chunks}")]
    TooManyChunks {
        token_id: String,
        n_chunks: usize,
        max_chunks: usize,
    },

    #[error("no usable tokens")]
    NoUsableTokens,

    #[error("unknown target type `{0}`")]
    UnknownTarget(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("types with fewer tokens than folds ({k}): {}", types.join(", "))]
    TypeTooRare { k: usize, types: Vec<String> },

    #[error("too few types for a distance study: {0} pairs (need at least 3)")]
    TooFewTypes(usize),

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid matrix file {path}: {reason}")]
    InvalidMatrixFile { path: PathBuf, reason: String },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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

    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            expected,
            found,
            context: None,
        }
    }

    /// True for errors caused by bad input data or configuration, as opposed
    /// to environment failures.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
