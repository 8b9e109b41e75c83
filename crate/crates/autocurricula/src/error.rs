//! Crate-wide error type. Variants group failures by how callers should react
//! (and how the CLI maps them to exit codes: config 1, backend 2, assertion 3).

use std::io;

/// Unified error for every module in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or malformed config/data file.
    #[error("config: {0}")]
    Config(String),

    /// Task-text parse failure with 1-based line/column of the offending byte.
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// A prompt template is missing a required placeholder or got empty input.
    #[error("template: {0}")]
    Template(String),

    /// The backend responded, but not in the shape the protocol requires
    /// (unparseable verdicts, wrong task count, missing sections).
    #[error("protocol: {0}")]
    Protocol(String),

    /// The backend could not be reached or returned a transport-level failure.
    #[error("transport: {0}")]
    Transport(String),

    /// Random task generation exhausted its resample budget.
    #[error("generation: {0}")]
    Generation(String),

    /// An evaluation or state update referenced an unknown task or bad value.
    #[error("evaluation: {0}")]
    Evaluation(String),

    /// A requested check did not hold (CLI `stats` comparisons and similar).
    #[error("assertion: {0}")]
    Assertion(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Template(_) | Error::Io(_) => 1,
            Error::Transport(_) | Error::Protocol(_) => 2,
            Error::Generation(_) | Error::Evaluation(_) | Error::Assertion(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
