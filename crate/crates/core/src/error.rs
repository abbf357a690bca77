use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("solver did not converge at {at}: residual {residual:e} after {iterations} iterations")]
    Solver {
        at: String,
        residual: f64,
        iterations: usize,
    },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("chain is not mixing: acceptance rate {rate:.4} below {threshold}")]
    Mixing { rate: f64, threshold: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
