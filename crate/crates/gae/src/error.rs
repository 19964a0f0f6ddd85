use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Validation` covers bad inputs and violated preconditions, `Convergence`
/// covers iteration caps (which, given correct `(b, L)` constants, indicate a
/// misdeclared bound or an oracle bug), and `Internal` flags states the
/// algorithm's own invariants rule out, such as a broken monotone descent.
#[derive(Debug, Error)]
pub enum GaeError {
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GaeError>;
