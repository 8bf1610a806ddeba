use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("self-loop on node `{0}`")]
    SelfLoop(String),

    #[error("duplicate edge `{0} -> {1}`")]
    DuplicateEdge(String, String),

    #[error("duplicate node `{0}`")]
    DuplicateNode(String),

    #[error("graph contains a directed cycle through {0:?}")]
    Cycle(Vec<String>),

    #[error("node sets must be pairwise disjoint: `{0}` appears in more than one")]
    Overlap(String),

    #[error("{0} must not be empty")]
    EmptySet(&'static str),

    #[error("latent node `{0}` is not allowed in an adjustment set")]
    LatentInAdjustment(String),

    #[error("candidate pool has {size} variables, above the cap of {cap}")]
    PoolTooLarge { size: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("tier ordering violated: {0}")]
    TierViolation(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient samples: n = {n}, need more than {needed}")]
    InsufficientSamples { n: usize, needed: usize },

    #[error("singular correlation matrix over columns {columns:?}")]
    Singular { columns: Vec<String> },

    #[error("design matrix is rank deficient over columns {0:?}")]
    RankDeficient(Vec<String>),

    #[error("degenerate regression: {0}")]
    Degenerate(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
