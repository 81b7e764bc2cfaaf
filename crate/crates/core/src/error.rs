use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model was evaluated at a point where its formula is undefined, or an
    /// iterate left the model's admissible parameter box.
    #[error("domain error in model `{model}`: {detail}")]
    Domain { model: String, detail: String },

    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("normal equations are numerically singular")]
    SingularNormalEquations,

    /// Fewer strictly positive weights than parameters.
    #[error("degenerate weights: {positive} positive weights, need at least {required}")]
    Degenerate { positive: usize, required: usize },

    #[error("weight vector has zero variance (tau_n = 0)")]
    DegenerateWeights,

    #[error("non-positive variance in pivot denominator: {0}")]
    NonPositiveVariance(f64),

    #[error("too few usable replicates: {found} (need {required})")]
    TooFewReplicates { found: usize, required: usize },

    #[error("base fit did not converge ({0})")]
    BaseFitNotConverged(String),

    #[error("worker pool: {0}")]
    Pool(String),

    #[error("empty sample")]
    EmptySample,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no `Data:` marker found")]
    MissingDataMarker,

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(model: &str, detail: impl Into<String>) -> Self {
        Error::Domain {
            model: model.to_string(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
