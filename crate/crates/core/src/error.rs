use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// An unstable mode of `A` cannot be reached from `B`.
    #[error("pair (A, B) is not stabilizable")]
    NotStabilizable,

    /// The Hamiltonian has eigenvalues on (or numerically near) the imaginary
    /// axis, or refinement could not reach the residual contract.
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("iteration did not converge after {iterations} steps")]
    NotConverged { iterations: usize },

    #[error("design matrix is rank deficient (rank {rank} < {columns})")]
    RankDeficient { rank: usize, columns: usize },

    #[error("empty Pareto front")]
    EmptyFront,

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotStabilizable
                | Error::NoStabilizingSolution(_)
                | Error::NotConverged { .. }
                | Error::RankDeficient { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
