use thiserror::Error;

use crate::model::ChartKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("covariance matrix is asymmetric (max |s_ij - s_ji| = {max_deviation:e})")]
    Asymmetric { max_deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid chart spec: {0}")]
    InvalidSpec(String),

    #[error("no closed-form approximation for {0:?}")]
    UnsupportedKind(ChartKind),

    #[error("argument outside the formula's domain: {0}")]
    Domain(String),

    #[error("could not bracket target {target} for {kind:?} inside (0, {limit})")]
    NoBracket {
        kind: ChartKind,
        target: f64,
        limit: f64,
    },

    #[error("unknown table `{0}` (expected t1..t5)")]
    UnknownTable(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("duplicate date {0}")]
    DuplicateDate(chrono::NaiveDate),

    #[error("non-positive price at row {row}, column `{column}`")]
    NonPositivePrice { row: usize, column: String },

    #[error("channel `{0}` has (numerically) zero variance")]
    DegenerateChannel(String),

    #[error("panel too short: need at least {needed} rows, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
