use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation that could not be carried out reliably (singular
    /// systems, failed cross-checks).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed command line or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Process exit status associated with each error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 2,
            LabError::Domain(_) => 3,
            LabError::Numerical(_) => 4,
            LabError::Io(_) => 1,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> LabResult<T> {
    Err(LabError::Domain(msg.into()))
}
