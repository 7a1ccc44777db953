use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convexity violated at knot {knot}: slope {left} is followed by smaller slope {right}")]
    NonConvex { knot: usize, left: f64, right: f64 },

    #[error("non-unique minimizer: {0}")]
    NonUniqueMinimizer(String),

    #[error("invalid function parameters: {0}")]
    InvalidFunction(String),

    #[error("dyadic level {level} exceeds the depth cap {cap}")]
    DepthCap { level: u32, cap: u32 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("replication {rep} failed: {source}")]
    Replication {
        rep: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
