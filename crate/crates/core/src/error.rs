use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// The numerical rank of a linear system could not be decided; the
    /// descending singular spectrum is attached for auditing.
    #[error("numerical rank ambiguity: {message}")]
    NumericalRankAmbiguity { message: String, spectrum: Vec<f64> },

    #[error("no factor mode has clustering number one in both decompositions: {0}")]
    AssumptionViolation(String),

    #[error("rank-1 terms are linearly dependent (rank {rank} < {terms})")]
    DependentTerms { rank: usize, terms: usize },

    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
