use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("subject {0} has no staged CKD diagnosis")]
    NotStageable(String),

    #[error("column `{0}` has no observed values")]
    AllMissing(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{n} features exceeds the exact-enumeration capacity of {max}")]
    Capacity { n: usize, max: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no observed events; the partial likelihood is undefined")]
    NoEvents,

    #[error("Newton iterations did not converge after {iterations} steps (gradient norm {grad_norm:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        beta: Vec<f64>,
    },

    #[error("coefficients diverge ({0}); the data look separable, use a penalizer > 0")]
    Divergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("information matrix is singular; collinear columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("fold {fold}, stage `{stage}`: {source}")]
    Stage {
        fold: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, fold: usize, stage: &'static str) -> Self {
        Error::Stage {
            fold,
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
