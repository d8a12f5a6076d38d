use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid subset spec: {0}")]
    InvalidSubset(String),
    #[error("exact mode limited to {cap} vertices, got {n}")]
    CapExceeded { n: usize, cap: usize },
    #[error("weights cannot be normalized (all zero or non-finite)")]
    NotNormalizable,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graph has no translation group")]
    MissingTranslations,
    #[error("external field must be zero for cluster algorithms (h = {0})")]
    NonzeroField(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("support too large ({size} subsets, cap {cap}); enable sampling")]
    SupportTooLarge { size: u128, cap: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("chain is not reversible (max violation {0:e})")]
    NotReversible(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
