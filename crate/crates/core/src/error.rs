use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("exact matcher capacity exceeded: {flagged} flagged vertices in one component (limit {limit})")]
    Capacity { flagged: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("SAW table does not cover chain length {0}")]
    TableCoverage(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
