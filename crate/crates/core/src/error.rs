use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initialization failed after {retries} attempts: no start with 2g < ||A||^2")]
    InitFailed { retries: usize },

    #[error("all rank-1 components were truncated")]
    AllTruncated,

    #[error("rate fit window too short: {points} usable points (need at least {needed})")]
    WindowTooShort { points: usize, needed: usize },

    #[error("tensor file parse error: {0}")]
    Parse(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
