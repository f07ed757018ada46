use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid potential spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient at step {step}: {detail}")]
    NonFiniteGradient { step: u64, detail: String },

    #[error("planner hypothesis violated: {0}")]
    Ineligible(String),

    #[error("missing input: {0}")]
    Missing(String),

    #[error("unstable recursion: eta * Q[{index}] = {product} >= 2")]
    Unstable { index: usize, product: f64 },

    #[error("all {0} chains diverged")]
    AllDiverged(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("too few samples for a reliable estimate: {got} < {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
