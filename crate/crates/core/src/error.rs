use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("column `{column}` is numeric but row {row} holds `{token}`")]
    NotNumeric {
        column: String,
        row: usize,
        token: String,
    },

    #[error("degenerate discretization: {requested} bins requested, {effective} effective")]
    DegenerateBins { requested: usize, effective: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state {state} out of range for cardinality {cardinality}")]
    StateOutOfRange { state: usize, cardinality: usize },

    #[error("invalid parent set: {0}")]
    InvalidParents(String),

    #[error("alpha must lie strictly inside the simplex")]
    BoundaryAlpha,

    #[error("effective sample size {ess:.1} is below the floor {floor:.1} ({n_samples} samples)")]
    LowEss {
        ess: f64,
        floor: f64,
        n_samples: usize,
    },

    #[error("non-finite importance weight")]
    NonFiniteWeight,

    #[error("quadrature did not converge (estimated error {error:.3e})")]
    QuadratureNonConvergence { error: f64 },

    #[error("undefined maximum-likelihood column {column} in node `{node}`")]
    UndefinedColumn { node: String, column: usize },

    #[error("estimator failed on node `{node}`: {source}")]
    NodeFit {
        node: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid DAG: {0}")]
    InvalidDag(String),

    #[error("AUC undefined: fewer than two classes present in the test set")]
    AucUndefined,

    #[error("nothing to report: result set is empty")]
    EmptyReport,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
