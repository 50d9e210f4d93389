use thiserror::Error;

/// Errors produced by the solver, simulator and file layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("empty state list")]
    EmptyStateList,

    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("cost level explosion: stage {stage} has {count} levels (cap {cap})")]
    LevelCap {
        stage: usize,
        count: usize,
        cap: usize,
    },

    #[error("belief tree too large: {count} nodes by stage {stage} (cap {cap})")]
    NodeCap {
        stage: usize,
        count: usize,
        cap: usize,
    },

    #[error("joint trajectory count {count} exceeds cap {cap}")]
    EnumerationCap { count: f64, cap: f64 },

    #[error("observation {obs} has zero probability under action {action} at stage {stage}")]
    ZeroProbabilityObservation {
        stage: usize,
        action: usize,
        obs: usize,
    },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("discount factor beta = 1 has no geometric tail")]
    UndiscountedHorizon,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("policy file does not match model (expected hash {expected}, found {found})")]
    HashMismatch { expected: String, found: String },

    #[error("policy file: {0}")]
    PolicyFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
