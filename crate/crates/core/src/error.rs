use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments outside an operation's domain.
    #[error("{0}")]
    Usage(String),

    /// Malformed edge-list input, reported with its 1-based line number.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("graph generation failed: {0}")]
    Generation(String),

    /// The Riesz weight denominator vanishes for the listed degrees.
    #[error("degenerate weight for degree(s) {degrees:?} at p = {p}")]
    DegenerateWeight { degrees: Vec<usize>, p: f64 },

    #[error("not a refinement: {0}")]
    NotRefinement(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    /// Process exit code: 1 for usage errors, 2 for data and computation errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
