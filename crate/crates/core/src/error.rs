use thiserror::Error;

/// Errors produced anywhere in the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema: {0}")]
    Schema(String),

    #[error("ingest: {0}")]
    Ingest(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("query: {0}")]
    Query(String),

    #[error("config: {0}")]
    Config(String),

    /// The projection loss left the reals; the run is aborted rather than
    /// clamped because a clamped run would silently corrupt the ranking.
    #[error("optimizer: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("attack: {0}")]
    Attack(String),

    #[error("baseline: {0}")]
    Baseline(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("enumeration guard exceeded: {0}")]
    EnumerationGuard(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numeric machinery (as opposed to bad inputs).
    /// Drivers map these to a distinct exit code.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::Optimizer(_) | Error::Attack(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
