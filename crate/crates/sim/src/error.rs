use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hybd_core::Error),
    #[error("refusing to write an empty result table")]
    EmptyTable,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed channel dump: {reason}", path = path.display())]
    Dump { path: PathBuf, reason: String },
    #[error("{0} invariant(s) failed")]
    Invariants(usize),
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Core(_) | SimError::EmptyTable => 1,
            SimError::Invariants(_) => 2,
            SimError::Io { .. } | SimError::Dump { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
