use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain the model is defined on.
    #[error("{field}: {message}")]
    ParameterDomain { field: String, message: String },

    #[error("direction is tangent to the surface (cos = 0)")]
    GrazingSingularity,

    #[error("half vector undefined for exactly opposite directions")]
    DegenerateHalfVector,

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid material at {path}: {message}")]
    Invalid { path: String, message: String },

    #[error("uniform source exhausted")]
    UniformExhausted,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    BadVersion { expected: u32, found: u32 },

    #[error("truncated {what}: needed {needed} more bytes")]
    Truncated { what: &'static str, needed: usize },

    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },

    #[error("network shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ParameterDomain {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
