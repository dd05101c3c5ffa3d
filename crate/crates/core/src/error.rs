use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no steady state: arrival rate {lambda} exceeds lambda_max {lambda_max}")]
    NoSteadyState { lambda: f64, lambda_max: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
