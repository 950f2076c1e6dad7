use thiserror::Error;

use crate::topology::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology descriptor: {0}")]
    Descriptor(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("vocabulary: {0}")]
    Vocabulary(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("render: {0}")]
    Render(String),

    #[error("prompt parse: {0}")]
    Parse(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("logistic fit did not converge: {0}")]
    NotConverged(String),

    #[error("session: {0}")]
    Session(#[from] SessionError),

    #[error("{path}:{line}: {source}")]
    Record {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short code used by the command line for machine-parseable errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Descriptor(_) => "E_DESCRIPTOR",
            Error::UnknownNode(_) => "E_UNKNOWN_NODE",
            Error::Vocabulary(_) => "E_VOCABULARY",
            Error::Generation(_) => "E_GENERATION",
            Error::Render(_) => "E_RENDER",
            Error::Parse(_) => "E_PARSE",
            Error::Config(_) => "E_CONFIG",
            Error::Analysis(_) => "E_ANALYSIS",
            Error::RankDeficient(_) => "E_RANK_DEFICIENT",
            Error::NotConverged(_) => "E_NOT_CONVERGED",
            Error::Session(e) => e.code(),
            Error::Record { .. } | Error::Json(_) => "E_FORMAT",
            Error::Io(_) => "E_IO",
        }
    }
}

/// Failures of the human-baseline session service.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("session {0} has expired")]
    Expired(String),
    #[error("question {0} was already answered")]
    Duplicate(String),
    #[error("question {got} is not the next question (expected {expected})")]
    OutOfOrder { expected: String, got: String },
    #[error("session {0} is complete")]
    Complete(String),
    #[error("malformed question pool: {0}")]
    Pool(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "E_UNKNOWN_SESSION",
            SessionError::UnknownQuestion(_) => "E_UNKNOWN_QUESTION",
            SessionError::Expired(_) => "E_EXPIRED",
            SessionError::Duplicate(_) => "E_DUPLICATE",
            SessionError::OutOfOrder { .. } => "E_OUT_OF_ORDER",
            SessionError::Complete(_) => "E_COMPLETE",
            SessionError::Pool(_) => "E_POOL",
        }
    }
}
