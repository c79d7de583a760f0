use thiserror::Error;

/// Errors raised by the simulator, the optimizers and their helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QgsaError {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::statevector::MAX_QUBITS)]
    QubitCount(usize),

    #[error("qubit index {index} out of range for {n_qubits}-qubit circuit")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("CX control and target are both qubit {0}")]
    SameControlTarget(usize),

    #[error("parameter slot {0} is not used by any gate")]
    UnusedSlot(usize),

    #[error("parameter index {index} out of range for {k} parameters")]
    ParamIndex { index: usize, k: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid Pauli letter {0:?}")]
    InvalidPauli(char),

    #[error("failed to parse observable: {0}")]
    Parse(String),

    #[error("observable has no nonzero coefficient")]
    ZeroObservable,

    #[error("observable has no terms")]
    EmptyObservable,

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampled direction is the zero vector")]
    ZeroDirection,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QgsaError {
    fn from(e: std::io::Error) -> Self {
        QgsaError::Io(e.to_string())
    }
}

pub type Result<T, E = QgsaError> = std::result::Result<T, E>;
