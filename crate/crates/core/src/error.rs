//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the open domain a scalar map is defined on.
    #[error("{what}: {value} outside domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step size {0} outside [0, 1]")]
    AlphaRange(f64),

    #[error("grid estimator unavailable for dim {0} (requires dim <= 2)")]
    EstimatorUnavailable(usize),

    #[error("empty sample set: {0}")]
    EmptySample(&'static str),

    /// The classifier is identically zero on the estimation samples, so its
    /// confidence bound and edges are undefined.
    #[error("degenerate classifier: c == 0 on all estimation samples")]
    DegenerateClassifier,

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("non-finite log density encountered: {0}")]
    NonFiniteLogDensity(String),

    #[error("{name} = {value} outside {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Randomized instance generation could not satisfy a checker's
    /// hypothesis within the draw budget.
    #[error("no instance satisfying the hypothesis after {0} draws")]
    PreconditionUnmet(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.into(),
        }
    }
}
