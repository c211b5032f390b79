use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed record at line {line}: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown language: {0}")]
    UnknownLanguage(String),

    #[error("only {found} ranked languages present in corpus, {requested} requested (missing {shortfall})")]
    NotEnoughLanguages {
        requested: usize,
        found: usize,
        shortfall: usize,
    },

    #[error("not enough {class} records: need {needed}, have {available} (short by {})", needed - available)]
    InsufficientRecords {
        class: String,
        needed: usize,
        available: usize,
    },

    #[error("sampling quota infeasible for {dst} from {src}: need {needed}, filled {filled}")]
    QuotaInfeasible {
        dst: String,
        src: String,
        needed: usize,
        filled: usize,
    },

    #[error("prompt has {tokens} tokens, limit is {limit}")]
    PromptTooLong { tokens: usize, limit: usize },

    #[error("duplicate record key {0}")]
    DuplicateKey(String),

    #[error("completion transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },

    #[error("cache entry {key} is corrupt: {reason}")]
    CacheCorrupt { key: String, reason: String },

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },

    #[error("sequence length {length} exceeds model maximum {max_len}")]
    SequenceTooLong { length: usize, max_len: usize },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("degenerate statistics input: {0}")]
    Degenerate(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from bad input (configuration, arguments or
    /// data files) rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedRecord { .. }
                | Error::InvalidArgument(_)
                | Error::UnknownLanguage(_)
                | Error::NotEnoughLanguages { .. }
                | Error::InsufficientRecords { .. }
                | Error::QuotaInfeasible { .. }
                | Error::PromptTooLong { .. }
                | Error::DuplicateKey(_)
                | Error::CheckpointMismatch(_)
                | Error::Serde(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
