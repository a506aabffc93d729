use std::fmt;

/// Where in an input a parse failure happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub source: Option<String>,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "{}:{}", s, self.line),
            None => write!(f, "line {}", self.line),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location { source: None, line },
            message: message.into(),
        }
    }

    /// Attach a file name to a parse location.
    pub fn with_source(self, source: &str) -> Self {
        match self {
            Error::Parse { location, message } => Error::Parse {
                location: Location {
                    source: Some(source.to_string()),
                    line: location.line,
                },
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
