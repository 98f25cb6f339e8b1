use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined likelihood for child {child} at sample {sample}: {reason}")]
    UndefinedLikelihood {
        child: usize,
        sample: usize,
        reason: &'static str,
    },

    #[error("parameter {name} out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("steady-state solver did not converge after {sweeps} sweeps (worst residual {worst_residual:e})")]
    NonConvergence { sweeps: usize, worst_residual: f64 },

    #[error("steady state collapsed: {species} has phospho fraction {fraction:e} in sample {sample}")]
    CollapsedSteadyState { species: String, sample: usize, fraction: f64 },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: header mismatch at column {index}: `{left}` vs `{right}`")]
    HeaderMismatch {
        path: PathBuf,
        index: usize,
        left: String,
        right: String,
    },

    #[error("zero-variance column `{0}`")]
    ZeroVariance(String),

    #[error("empty sample set: {0}")]
    EmptySamples(String),

    #[error("ROC needs at least one positive and one negative label ({positives} positives, {negatives} negatives)")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),

    #[error("cache audit failed at iteration {iteration}: cached {cached} vs recomputed {fresh}")]
    CacheMismatch {
        iteration: usize,
        cached: f64,
        fresh: f64,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
