use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A covariance matrix stayed indefinite after the full jitter ladder.
    #[error("cholesky factorization of a {dim}x{dim} matrix failed (last jitter {jitter:e})")]
    FactorizationFailure { dim: usize, jitter: f64 },

    #[error("region-of-interest covariance is not positive definite")]
    SingularRoi,

    #[error("path-dependent region of interest needs at least one waypoint")]
    EmptyPath,

    #[error("{failed} of {total} sampled inducing subsets failed to factorize")]
    DegenerateCandidates { failed: usize, total: usize },

    #[error("budget of {budget} points exceeds the {candidates} available candidates")]
    BudgetExceedsCandidates { budget: usize, candidates: usize },

    #[error("frontier is empty; the mission area is fully explored")]
    EmptyFrontier,

    #[error("planner threshold {epsilon} must satisfy {y0} < epsilon <= 1")]
    InvalidThreshold { epsilon: f64, y0: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("map value {value} at row {row}, column {col} is outside [0, 1]")]
    ValueOutOfRange { row: usize, col: usize, value: f64 },

    #[error("reference framework {0} missing for ratio computation")]
    MissingReference(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
