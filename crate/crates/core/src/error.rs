use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid cost vector: {0}")]
    InvalidCosts(String),
    #[error("no path from node {from} to node {to}")]
    NoPath { from: usize, to: usize },
    #[error("more than {0} simple paths")]
    TooManyPaths(usize),
    #[error("schema error at row {row}, column `{column}`: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },
    #[error("series has no observed value")]
    EmptySeries,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("non-positive speed on arc {arc} in scenario {scenario}")]
    ZeroSpeed { arc: usize, scenario: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("label budget of {0} exceeded")]
    LabelBudgetExceeded(usize),
    #[error("branch-and-bound node budget of {0} exceeded")]
    NodeBudgetExceeded(usize),
    #[error("graph has no pair of distinct connected nodes")]
    NoConnectedPairs,
    #[error("report contains no records")]
    EmptyReport,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the errors a solver raises when an instance exhausts its search budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::LabelBudgetExceeded(_) | Error::NodeBudgetExceeded(_) | Error::TooManyPaths(_)
        )
    }
}
