use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("vector has zero variance")]
    ZeroVariance,

    #[error(
        "matrix is not positive definite: min eigenvalue {min_eigenvalue:.6e}, max {max_eigenvalue:.6e}"
    )]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("matrix is ill-conditioned in {context}: condition estimate {cond:.3e}")]
    IllConditioned { context: &'static str, cond: f64 },

    #[error("rank-deficient projection in {context}")]
    RankDeficient { context: &'static str },

    #[error("model is not identifiable: {0}")]
    NonIdentifiable(&'static str),

    #[error("degenerate kernel: all off-diagonal entries are zero")]
    DegenerateKernel,

    #[error("no convergence after {iterations} iterations (last value {last:.6})")]
    NonConvergence { iterations: usize, last: f64 },

    #[error(
        "target correlation {target} is outside the attainable range for these marginals (closest achievable {achievable:.6})"
    )]
    CorrelationUnattainable { target: f64, achievable: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
