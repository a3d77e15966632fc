use thiserror::Error;

/// Errors produced by the optimizer, its estimators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The oracle cannot serve the requested number of evaluations. Nothing was charged.
    #[error("budget exhausted: requested {requested} evaluations, {remaining} remaining")]
    BudgetExhausted { requested: u64, remaining: u64 },

    /// An estimator could not produce a value; callers keep their previous estimate.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// The search distribution became non-finite; the run cannot continue.
    #[error("numerical breakdown: {0}")]
    Diverged(String),

    #[error("degenerate efficiency bound: {0}")]
    DegenerateBound(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_budget_exhausted(&self) -> bool {
        matches!(self, Error::BudgetExhausted { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
