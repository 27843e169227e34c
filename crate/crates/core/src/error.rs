use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A document could not be tokenized or a field could not be read.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally well-formed input that violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// No iso-energy reduction satisfies strong connectivity at the requested
    /// tolerance. `tightest_delta` is the smallest tolerance that would, if any.
    #[error("iso-energy reduction infeasible at delta={requested_delta}; tightest achievable delta is {tightest_delta:?}")]
    InfeasibleReduction {
        requested_delta: f64,
        tightest_delta: Option<f64>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
