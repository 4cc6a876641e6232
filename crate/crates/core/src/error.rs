use std::path::PathBuf;

use thiserror::Error;

use crate::qp::QpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario not found: {0}")]
    ScenarioNotFound(PathBuf),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("initial safe-set violation between {first} and {second}: {detail}")]
    InitialOverlap {
        first: String,
        second: String,
        detail: String,
    },

    #[error("bad override `{0}`: expected KEY=VALUE with a dotted key path")]
    Override(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("no neighbours to compute an escape direction from")]
    NoNeighbours,

    #[error("bearing undefined for coincident points")]
    CoincidentPoints,

    #[error("QP assembly failed for robot {robot}: Hessian block is singular")]
    SingularHessian { robot: usize },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Qp(#[from] QpError),

    #[error("log line {line}: {message}")]
    Log { line: u64, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
