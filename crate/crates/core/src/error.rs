use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a type invariant at construction time.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Bad or unknown configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A loss component evaluated to NaN or infinity.
    #[error("loss component `{component}` is not finite ({value})")]
    NonFinite { component: &'static str, value: f64 },

    /// Malformed input file.
    #[error("parse error in {path}{}: {reason}", record.as_ref().map(|r| format!(" (record {r})")).unwrap_or_default())]
    Parse {
        path: String,
        record: Option<String>,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn parse(
        path: impl Into<String>,
        record: Option<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            record,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
