use std::path::PathBuf;

use crate::game::InfosetKey;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad user input: unknown game, malformed config line, invalid key or value.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (illegal action, wrong node kind, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A policy table lacks an entry for an infoset the evaluator needed.
    #[error("policy has no entry for infoset {0}")]
    MissingInfoset(InfosetKey),

    /// A policy entry has the wrong length or is not a distribution.
    #[error("invalid policy entry at {key}: {reason}")]
    InvalidPolicy { key: InfosetKey, reason: String },

    /// Network training diverged or received malformed data.
    #[error("training error: {0}")]
    Training(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
