use std::path::PathBuf;

/// Errors surfaced by estimator caps, decompositions and file I/O.
///
/// Structural misuse (index out of range, dimension mismatch on internal
/// calls) panics instead; everything reachable from user input goes
/// through this type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("enumeration cap exceeded: {what} requires {required}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty vector set")]
    EmptySet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
