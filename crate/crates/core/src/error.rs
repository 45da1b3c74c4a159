use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model integrity error: {0}")]
    Integrity(String),
}

impl ModelError {
    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        ModelError::Integrity(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("semantic error at {line}:{column}: {message}")]
    Semantic { line: usize, column: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("IR document does not match schema at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported IR document version {0} (expected 1)")]
    Version(i64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("genome has {genome} bits but the genome space has {space} loops")]
    LengthMismatch { genome: usize, space: usize },
    #[error("pattern references loop {0} which is not in the model")]
    UnknownLoop(usize),
    #[error("loop {0} appears twice in the genome space")]
    DuplicateLoop(usize),
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("cannot read pattern DB {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("pattern DB is not a JSON array of records: {0}")]
    Format(String),
    #[error("pattern DB record {index}: {message}")]
    Record { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("genome space is empty: no offloadable loops")]
    EmptySpace,
    #[error("exhaustive search refused: genome length {len} exceeds cap {cap}")]
    TooLarge { len: usize, cap: usize },
    #[error("expected one verdict per loop ({loops}), got {verdicts}")]
    VerdictCount { loops: usize, verdicts: usize },
    #[error("invalid GA parameters: {0}")]
    Params(String),
}

/// Pipeline failure, classified by process exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot load {path}: {message}")]
    Parse { path: String, message: String },
    #[error("evaluator error: {0}")]
    Evaluator(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Parse { .. } => 3,
            PipelineError::Evaluator(_) => 4,
            PipelineError::Io { .. } | PipelineError::Model(_) => 1,
        }
    }
}
