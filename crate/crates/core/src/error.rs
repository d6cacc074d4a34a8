use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backend error: {0}")]
    Backend(String),

    /// A peer sent something that violates the wire schema or a backend
    /// contract. `field` names the offending field path.
    #[error("protocol error in `{field}`: {message}")]
    Protocol {
        field: String,
        message: String,
        payload: String,
    },

    /// A line-oriented input file failed to parse.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        field: Option<String>,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error classes, stable across releases; used for exit codes and
/// machine-readable error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidArgument,
    Backend,
    Protocol,
    Parse,
    Io,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::InvalidArgument => "invalid-argument",
            ErrorKind::Backend => "backend-error",
            ErrorKind::Protocol => "protocol-error",
            ErrorKind::Parse => "parse-error",
            ErrorKind::Io => "io-error",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn backend(msg: impl Into<String>) -> Self {
        Error::Backend(msg.into())
    }

    pub fn protocol(
        field: impl Into<String>,
        message: impl Into<String>,
        payload: impl Into<String>,
    ) -> Self {
        Error::Protocol {
            field: field.into(),
            message: message.into(),
            payload: payload.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::InvalidArgument,
            Error::Backend(_) => ErrorKind::Backend,
            Error::Protocol { .. } => ErrorKind::Protocol,
            Error::Parse { .. } => ErrorKind::Parse,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    /// Field path associated with the error, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Protocol { field, .. } => Some(field),
            Error::Parse { field, .. } => field.as_deref(),
            _ => None,
        }
    }
}
