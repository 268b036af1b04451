use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("timestamp {0} s exceeds 99:59:59")]
    TimestampRange(u64),

    #[error("invalid timestamp {input:?} at byte {offset}: {reason}")]
    TimestampParse {
        input: String,
        offset: usize,
        reason: &'static str,
    },

    #[error("invalid utterance: {0}")]
    InvalidUtterance(String),

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("invalid chapter set: {0}")]
    InvalidChapters(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: record {index}: {message}")]
    Record {
        path: PathBuf,
        index: usize,
        message: String,
    },

    #[error("{path}: line {line}: {message}")]
    ChapterFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty transcript")]
    EmptyTranscript,

    #[error("no chapters parsed from generator output")]
    NoChaptersParsed { raw: String },

    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty prompt")]
    EmptyPrompt,

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },

    #[error("protocol error (status {status}): {body}")]
    Protocol { status: u16, body: String },

    #[error("unknown {kind} {name:?}; available: {available}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("misuse: {0}")]
    Misuse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
