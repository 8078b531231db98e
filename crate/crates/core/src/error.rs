use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration could not be parsed or violates domain invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// One entry per violated invariant.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),

    #[error("unknown configuration key `{key}`; valid keys are: {}", .valid.join(", "))]
    UnknownKey { key: String, valid: Vec<String> },

    /// A persisted file is malformed.
    #[error("{path}: {kind}")]
    Format { path: PathBuf, kind: FormatError },

    #[error("malformed CSI report: {0}")]
    Report(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    Magic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} (this reader supports version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invalid(_) | Error::UnknownKey { .. } | Error::Json(_) => 2,
            Error::Format { .. } | Error::Report(_) => 3,
            Error::Numerical(_) => 4,
            Error::Sample { source, .. } => source.exit_code(),
            Error::Contract(_) | Error::Io(_) => 1,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, kind: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            kind,
        }
    }
}
