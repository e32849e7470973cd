use thiserror::Error;

/// Every failure the workbench reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on node `{node}`")]
    SelfLoop { line: usize, node: String },

    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("pair ({0}, {0}) is not a pair of distinct nodes")]
    SameNode(usize),

    #[error("pair ({0}, {1}) is not part of the pair universe")]
    PairNotInUniverse(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested {requested} negative pairs but only {available} unlinked pairs exist")]
    InsufficientNegatives { requested: usize, available: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("model shapes differ")]
    ShapeMismatch,

    #[error("AUC undefined: scores contain a single class")]
    UndefinedAuc,

    #[error("degenerate: constant difference")]
    ConstantDifference,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
