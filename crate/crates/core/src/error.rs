use thiserror::Error;

/// Errors produced by the pricing-loss library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular system")]
    Singular,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("overlap violated: propensity {value} at price index {price_index}")]
    OverlapViolated { price_index: usize, value: f64 },

    #[error("invalid distribution ({what}): {reason}")]
    InvalidDistribution { what: &'static str, reason: String },

    #[error("invalid price ladder: {0}")]
    InvalidLadder(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("estimator {0} requires a demand model")]
    MissingDemandModel(&'static str),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("record {row} has no latent valuation")]
    MissingValuation { row: usize },

    #[error("schema error at row {row}, column {column}: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            got,
        }
    }
}
