use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the toolkit. Each variant belongs to one
/// [`ErrorCategory`], which the CLI and the HTTP service map to stable codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error in {field} at byte {position}: {reason}")]
    Format {
        field: &'static str,
        position: u64,
        reason: String,
    },

    #[error("index {index} out of range for {len} records")]
    Index { index: u64, len: u64 },

    #[error("record {record} is corrupt: {reason}")]
    Corruption { record: u64, reason: String },

    #[error("truncated stream: {0}")]
    Truncation(String),

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("symbol {symbol} has no code in the Huffman table")]
    TableMismatch { symbol: u8 },

    #[error("I/O error at byte {position}: {source}")]
    Io {
        position: u64,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Input,
    Config,
    Format,
    Index,
    Corruption,
    Truncation,
    TableMismatch,
    Io,
}

impl ErrorCategory {
    /// Process exit code used by the CLI for this family of errors.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 3,
            ErrorCategory::Config => 4,
            ErrorCategory::Format => 5,
            ErrorCategory::Index => 6,
            ErrorCategory::Corruption => 7,
            ErrorCategory::Truncation => 8,
            ErrorCategory::TableMismatch => 9,
            ErrorCategory::Io => 10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Input => "input",
            ErrorCategory::Config => "config",
            ErrorCategory::Format => "format",
            ErrorCategory::Index => "index",
            ErrorCategory::Corruption => "corruption",
            ErrorCategory::Truncation => "truncation",
            ErrorCategory::TableMismatch => "table_mismatch",
            ErrorCategory::Io => "io",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Input(_) => ErrorCategory::Input,
            Error::Config(_) => ErrorCategory::Config,
            Error::Format { .. } => ErrorCategory::Format,
            Error::Index { .. } => ErrorCategory::Index,
            Error::Corruption { .. } | Error::InvalidCode(_) => ErrorCategory::Corruption,
            Error::Truncation(_) => ErrorCategory::Truncation,
            Error::TableMismatch { .. } => ErrorCategory::TableMismatch,
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(field: &'static str, position: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            field,
            position,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(position: u64, source: io::Error) -> Self {
        Error::Io { position, source }
    }
}
