use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid payoff matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid simplex point: {0}")]
    InvalidSimplexPoint(String),

    #[error("point is not on the unit sphere (norm {norm})")]
    NotOnSphere { norm: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("clique enumeration truncated after {0} cliques")]
    CliqueCapExceeded(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("too few samples: need {need}, have {have}")]
    TooFewSamples { need: usize, have: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from a numerical procedure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

