use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record in an input file could not be parsed. `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("unknown document id {0:?}")]
    UnknownDocId(String),

    #[error("span {start}..{end} out of range for document {doc_id:?} of length {len}")]
    OffsetOutOfRange {
        doc_id: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("surface mismatch in document {doc_id:?} at {start}..{end}: expected {expected:?}, found {found:?}")]
    SurfaceMismatch {
        doc_id: String,
        start: usize,
        end: usize,
        expected: String,
        found: String,
    },

    #[error("overlapping annotations in document {doc_id:?}: {first_label} {first:?} and {second_label} {second:?}")]
    OverlappingAnnotations {
        doc_id: String,
        first: (usize, usize),
        first_label: Label,
        second: (usize, usize),
        second_label: Label,
    },

    #[error("overlapping spans {first:?} and {second:?}")]
    OverlappingSpans {
        first: (usize, usize),
        second: (usize, usize),
    },

    #[error("orphan {tag} at token {index}: an I tag must follow B or I of the same label")]
    OrphanTag { index: usize, tag: String },

    #[error("malformed tag {0:?}")]
    MalformedTag(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("token surface {0:?} cannot be written: surfaces must be non-empty and free of tabs and newlines")]
    UnwritableSurface(String),

    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid pattern {pattern:?}: {source}")]
    InvalidPattern {
        pattern: String,
        #[source]
        source: Box<regex::Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Failures of an NER backend. Kept separate from [`Error`] so callers can
/// tell a broken tagger apart from bad input.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("failed to start backend {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("backend i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("backend protocol violation: expected {expected} tagged tokens, got {actual}")]
    CountMismatch { expected: usize, actual: usize },

    #[error("backend protocol violation at token {index}: sent {sent:?}, echoed {echoed:?}")]
    SurfaceMismatch {
        index: usize,
        sent: String,
        echoed: String,
    },

    #[error("backend protocol violation: malformed line {0:?}")]
    MalformedLine(String),

    #[error("backend protocol violation: malformed tag {0:?}")]
    MalformedTag(String),

    #[error("backend emitted label {0:?} which has no entry in the label map")]
    UnknownLabel(String),

    #[error("backend closed its output stream")]
    Closed,

    #[error("backend exceeded the {0:?} per-document deadline and was killed")]
    Timeout(std::time::Duration),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Backend(_))
    }
}
