use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or contradictory input data or configuration.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown food code `{0}`")]
    UnknownFood(String),

    #[error("insufficient meals: need more than {needed}, got {got}")]
    InsufficientMeals { needed: usize, got: usize },

    #[error("prototype criteria not met in subcategory `{subcategory}`: {criterion}")]
    Prototype { subcategory: String, criterion: String },

    #[error("infeasible cluster {cluster}: {reason}")]
    InfeasibleCluster { cluster: String, reason: String },

    #[error("infeasible portioning; blocking constraints: {}", .blocking.join(", "))]
    Infeasible { blocking: Vec<String> },

    #[error("pricing error: no portion entry or fallback price for `{0}`")]
    Pricing(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
