use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),

    #[error("non-positive or non-finite price at data row {row}")]
    NonPositivePrice { row: usize },

    #[error("could not parse data row {row}: {message}")]
    ParseError { row: usize, message: String },

    #[error("series of length {len} is too short (need more than {required})")]
    SeriesTooShort { len: usize, required: usize },

    #[error("simulation produced a non-positive price at step {step}")]
    NonPositivePriceGenerated { step: usize },

    #[error("volatility window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("drift r is zero; the optimal strength is undefined")]
    ZeroDrift,

    #[error("volatility sigma is zero")]
    ZeroVolatility,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not symmetric positive semidefinite")]
    NotPsd,

    #[error("covariance matrix is singular (condition number {condition:e})")]
    SingularCovariance { condition: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("model expects input of size {expected}, got {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("non-finite loss {loss} at training step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("wealth returns have zero dispersion; Sharpe ratio undefined")]
    ZeroDispersion,

    #[error("no point has mean return above the risk-free rate")]
    NoExcessReturn,

    #[error("empty grid")]
    EmptyGrid,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
