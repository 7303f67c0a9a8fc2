use thiserror::Error;

/// Errors produced by the solvers and file parsers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("graph is disconnected: vertices {0} and {1} are not connected")]
    Disconnected(usize, usize),

    #[error("empty far-pair set at threshold {0}")]
    EmptyFarSet(f64),

    #[error("problem is unbounded: far pair ({0}, {1}) is not linked by any constrained pair")]
    Unbounded(usize, usize),

    #[error("kernel is not in the cone (violation {violation:.3e})")]
    NotInCone { violation: f64, witness: Vec<f64> },

    #[error("size {n} exceeds the limit {limit} for exhaustive cut enumeration")]
    TooLarge { n: usize, limit: usize },

    #[error("cut limit {cuts} reached; optimum bracketed in [{lower:.9}, {upper:.9}]")]
    IterationCap { cuts: usize, lower: f64, upper: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file: {0}")]
    Format(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::IterationCap { .. } | Error::Numerical(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
