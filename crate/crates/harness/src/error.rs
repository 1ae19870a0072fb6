use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] molcom_core::Error),
    #[error(transparent)]
    Sim(#[from] molcom_sim::Error),
    #[error(
        "estimated {estimate:.3e} particle-steps exceeds the cap of {cap:.3e}; \
         at most {suggested_trials} trials fit"
    )]
    Budget { estimate: f64, cap: f64, suggested_trials: u64 },
    #[error("incompatible tables: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Core(_) | Error::Sim(_) | Error::Schema(_) | Error::Json(_) => 2,
            Error::Budget { .. } => 3,
            Error::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
