use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("reward vector has {got} entries, expected {expected}")]
    RewardLength { expected: usize, got: usize },

    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),

    #[error("action {action} is not available in environment `{env_id}`")]
    UnsupportedAction { action: String, env_id: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
