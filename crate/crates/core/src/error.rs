use std::path::PathBuf;

/// Errors produced by the sensing library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: need {needed} samples, have {available}")]
    OutOfRange { needed: usize, available: usize },

    #[error("covariance accumulator is empty")]
    EmptyAccumulator,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("detector state error: {0}")]
    State(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// `line` is 1-based; 0 when the problem is not tied to one line.
    #[error("config error{}, field `{field}`: {message}", at_line(*line))]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}
