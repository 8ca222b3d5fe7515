use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter combination that can never be valid (bad factor, non-square input, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed bytes in an image, snapshot, checkpoint or dataset file.
    #[error("format error: {0}")]
    Format(String),

    /// An operation was called with arguments that break its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure at step {step}: {what}")]
    Numerical { step: u64, what: String },

    #[error("empty state: {0}")]
    EmptyState(String),

    /// An operation was asked for a result its inputs cannot provide yet.
    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
