use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate module id `{0}` in dependency graph")]
    DuplicateModule(String),

    #[error("edge endpoint `{0}` is not a declared module")]
    UnknownModule(String),

    #[error("empty module id")]
    EmptyModuleId,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("clustered cost overflows 64-bit arithmetic (N={modules}, lambda={lambda})")]
    CostOverflow { modules: usize, lambda: u32 },

    #[error("git log parse error at byte {offset}: field `{field}`: {message}")]
    GitLog {
        offset: usize,
        field: &'static str,
        message: String,
    },

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("no history: the commit list is empty")]
    NoHistory,

    #[error("empty series")]
    EmptySeries,

    #[error("unknown language profile `{0}`")]
    UnknownProfile(String),

    #[error("invalid import pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad or missing user input (files, formats, flags).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DuplicateModule(_)
                | Error::UnknownModule(_)
                | Error::EmptyModuleId
                | Error::InvalidParameter(_)
                | Error::GitLog { .. }
                | Error::Line { .. }
                | Error::NoHistory
                | Error::UnknownProfile(_)
                | Error::Pattern { .. }
                | Error::Config(_)
                | Error::Io { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
