use thiserror::Error;

/// Errors raised by the simulators, the protocol state machine and the runner.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("qubit index {index} out of range for {qubits} qubits")]
    QubitIndex { index: usize, qubits: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("phase order violation: `{operation}` requires phase {expected}, session is {found}")]
    Phase {
        operation: &'static str,
        expected: &'static str,
        found: &'static str,
    },

    #[error("security checkpoint `{0}` has not passed")]
    Checkpoint(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
