use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("column {name} has zero variance")]
    ConstantColumn { index: usize, name: String },

    #[error("unknown cluster id {0}")]
    UnknownNode(usize),

    #[error("cluster {0} is the root and has no parent")]
    RootHasNoParent(usize),

    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("rejected set is not ancestor-closed (cluster {0} rejected before its parent)")]
    NotAncestorClosed(usize),

    #[error("policy does not match the hypothesis collection: {0}")]
    PolicyMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from bad user input rather than a bug or an I/O failure.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Internal(_) | Error::Io(_))
    }
}
