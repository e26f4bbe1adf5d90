use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("joint action {joint:?} is invalid for node {node}: {reason}")]
    InvalidJointAction {
        node: usize,
        joint: Vec<usize>,
        reason: &'static str,
    },
    #[error(
        "enumeration of {profiles} joint profiles exceeds the cap of {cap}; use solve_tree only"
    )]
    EnumerationCap { profiles: f64, cap: u64 },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("refusal count {t_not} exceeds batch length {batch_len}")]
    RefusalCount { t_not: u64, batch_len: u64 },
    #[error("horizon {horizon} is shorter than the exploration schedule ({required} rounds)")]
    HorizonTooShort { horizon: u64, required: u64 },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
