use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the failure classes of the public operations:
/// capacity limits, bad qubit indices, invalid arguments, malformed files,
/// and calls made in the wrong order.
#[derive(Debug, Error)]
pub enum Error {
    /// Simulator capacity exceeded or zero qubits requested.
    #[error("qubit count {requested} outside supported range 1..={max}")]
    Capacity { requested: usize, max: usize },

    /// A gate references a qubit outside the register.
    #[error("qubit index {index} out of range for {n_qubits}-qubit state")]
    QubitIndex { index: usize, n_qubits: usize },

    /// Invalid argument to an operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Malformed binary or text file; `offset` is the byte position where
    /// decoding failed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Operation called in an invalid order (e.g. backward before forward).
    #[error("invalid state: {0}")]
    State(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
