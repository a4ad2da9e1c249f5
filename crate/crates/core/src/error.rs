use thiserror::Error;

/// Errors produced by the simulator, the diagnostics and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solution diverged at t = {t}: {reason}")]
    Divergence {
        t: f64,
        reason: String,
        /// Samples recorded before the failure, when a whole run was in progress.
        partial: Option<Box<crate::solver::Trajectory>>,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("trajectories are not aligned: {0}")]
    Alignment(String),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
