use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target out of range: {what} = {value} exceeds unambiguous limit {limit}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("recording too short: need at least {required} chirps, have {available}")]
    TooShort { required: usize, available: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("format error in {path}: {msg}", path = .path.as_deref().map(|p| p.display().to_string()).unwrap_or_else(|| "<stream>".into()))]
    Format { path: Option<PathBuf>, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn with_path(self, path: &std::path::Path) -> Self {
        match self {
            Error::Format { msg, .. } => Error::Format {
                path: Some(path.to_path_buf()),
                msg,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
