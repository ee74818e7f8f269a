use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("two-form index {0} out of range (expected 1, 2 or 3)")]
    FormIndex(usize),
    #[error("zero vector where a nonzero one is required: {0}")]
    ZeroVector(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lattice matrix is not orientation-preserving and invertible (det = {0})")]
    DegenerateLattice(f64),
    #[error("summand is singular at offset {0:?}")]
    Singular([f64; 4]),
    #[error("tail bound {bound:.3e} exceeds tolerance {tol:.3e} at radius {radius}")]
    TailTolerance { bound: f64, tol: f64, radius: u32 },
    #[error("finite-difference derivative unstable: halving the step changed the result by {0:.3e} (relative)")]
    Richardson(f64),
    #[error("point {0} has no gluing datum")]
    Unglued(String),
    #[error("no opposite-orientation points around {0}")]
    NoSources(String),
    #[error("conflicting zeta at opposite points {0} and {1}")]
    OppositeConflict(String, String),
    #[error("configuration is partial; {0}")]
    Partial(String),
    #[error("wrong orientation pattern: {0}")]
    Pattern(String),
    #[error("malformed configuration document: {0}")]
    Document(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
