use thiserror::Error;

/// Errors raised by the library.
///
/// The variants line up with the CLI exit codes: input and precondition
/// problems map to 2, validation failures to 1, and anything that means the
/// model itself is broken (a solver failure where existence is guaranteed, a
/// failed self-check) maps to 3.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("unknown idempotent `{0}`")]
    UnknownIdempotent(String),

    #[error("malformed presentation: {0}")]
    Malformed(String),

    #[error("invalid presentation:\n{0}")]
    Invalid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("internal invariant breach: {0}")]
    Invariant(String),

    #[error("step budget of {0} exhausted")]
    Budget(usize),

    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },

    #[error("schema violation in `{field}`: {msg}")]
    Schema { field: String, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn schema(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema { field: field.into(), msg: msg.into() }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Malformed(_) => 1,
            Error::Verification(_) | Error::Invariant(_) | Error::Budget(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
