use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed clip header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },

    #[error("truncated payload at byte {offset}: expected {expected} more bytes, found {found}")]
    TruncatedPayload {
        offset: u64,
        expected: u64,
        found: u64,
    },

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}{}", .context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected_width: u32,
        expected_height: u32,
        width: u32,
        height: u32,
        context: Option<String>,
    },

    #[error("window of {window}x{window} pixels does not fit a {width}x{height} frame")]
    WindowTooLarge { window: u32, width: u32, height: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration space has {size} members, exceeding the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u64 },

    #[error("accuracy profile has no entry for `{0}`")]
    ProfileMiss(String),

    #[error("{file}: row {row}: {reason}")]
    MalformedRow {
        file: String,
        row: usize,
        reason: String,
    },

    #[error("time {t} s is outside the trace span [{start}, {end}]")]
    OutsideTrace { t: f64, start: f64, end: f64 },

    #[error("trace gap between t={from} s and t={to} s (cadence {cadence} s)")]
    TraceGap { from: f64, to: f64, cadence: f64 },

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by the environment (files, parsing) rather
    /// than by the domain.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedHeader { .. }
                | Error::TruncatedPayload { .. }
                | Error::Json { .. }
                | Error::Csv { .. }
                | Error::MalformedRow { .. }
        )
    }
}
