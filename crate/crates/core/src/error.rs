use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),

    #[error("dataset has no rows")]
    EmptyData,

    #[error("column {column:?}: {reason}")]
    BadColumn { column: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("impurity is undefined for all-zero class totals")]
    ZeroTotals,

    #[error("sample {0} is not covered by any rule")]
    UncoveredSample(usize),

    #[error("no rule is satisfied by the query point and fallback is disabled")]
    NoSatisfiedRule,

    #[error("exact cover enumeration refused: {rules} rules exceeds the bound of {bound}")]
    TooManyRules { rules: usize, bound: usize },

    #[error("oracle refused instance: {0}")]
    OracleBounds(String),

    #[error("simplex pivot limit {limit} exceeded ({rows} rule rows, {cols} columns, objective {objective})")]
    PivotLimit {
        limit: usize,
        rows: usize,
        cols: usize,
        objective: f64,
    },

    #[error("LP solve failed at RMP call {iteration}: {source}")]
    Rmp {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training failed on fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures that indicate a bug rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        match self {
            Error::Invariant(_) | Error::PivotLimit { .. } => true,
            Error::Rmp { source, .. } | Error::Fold { source, .. } => {
                source.is_invariant_violation()
            }
            _ => false,
        }
    }
}
