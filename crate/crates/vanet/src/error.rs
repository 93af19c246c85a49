use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    /// A node or link breaks the communication table or registration rules.
    #[error("{element}: {reason}")]
    Topology { element: String, reason: String },
    #[error("event #{index} ({kind}): {reason}")]
    Event {
        index: usize,
        kind: String,
        reason: String,
    },
    #[error("defaults: {0}")]
    Defaults(String),
    #[error(transparent)]
    Channel(#[from] kljn_core::Error),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("{0}")]
    Usage(String),
}
