use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: need at least {needed}, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("rank deficient: {0}")]
    Rank(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("degenerate statistical outcome: {0}")]
    Degenerate(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
