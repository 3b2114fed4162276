use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max |a - a^H| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPsd { eigenvalue: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    Index { index: usize, n_qubits: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported gate `{0}`")]
    UnsupportedGate(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("context mismatch: expected value of kind `{expected}` cannot be checked by protocol `{protocol}`")]
    Context { expected: String, protocol: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("protocol `{protocol}` failed: {source}")]
    Protocol {
        protocol: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures that stem from invalid inputs rather than numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_)
            | Error::InvalidCircuit(_)
            | Error::InvalidState(_)
            | Error::UnsupportedGate(_)
            | Error::Context { .. }
            | Error::Dimension(_)
            | Error::Index { .. }
            | Error::SizeLimit(_) => true,
            Error::Protocol { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
