use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive price {price} at index {index} ({date})")]
    NonPositivePrice {
        index: usize,
        date: NaiveDate,
        price: f64,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("timestamps not strictly increasing at index {index} ({date})")]
    UnorderedDates { index: usize, date: NaiveDate },

    #[error("series too short: need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("empty input")]
    Empty,

    #[error("zero mean absolute return in the normalization window ending before {date}")]
    ZeroWindow { date: NaiveDate },

    #[error("zero-variance series")]
    ZeroVariance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "autocorrelation structure is not positive semi-definite (pivot {pivot:.3e} at lag {lag})"
    )]
    NotPositiveSemiDefinite { lag: usize, pivot: f64 },

    #[error("target autocorrelations are not realizable by a moving-average process: spectral density reaches {min_density:.3e} at frequency {frequency:.4}")]
    Infeasible { min_density: f64, frequency: f64 },

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("Monte Carlo budget exhausted after {evaluations} objective evaluations")]
    BudgetExhausted { evaluations: usize },

    #[error("invalid process spec: {0}")]
    InvalidSpec(String),

    #[error("CSV error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
