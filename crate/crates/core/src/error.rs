use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bank configuration: {0}")]
    InvalidBank(String),

    #[error("warping coefficient must satisfy |mu| < 1, got {0}")]
    InvalidMu(f64),

    #[error("invalid prototype filter: {0}")]
    InvalidPrototype(String),

    #[error("invalid source model: {0}")]
    InvalidModel(String),

    #[error("no bracket for band {band} half-width in (0, pi]")]
    NoBracket { band: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("singular KKT system: {0}")]
    SingularKkt(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("cepstral recovery failed: {0}")]
    Cepstrum(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for numerical failures, false for bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoBracket { .. }
                | Error::Infeasible
                | Error::Unbounded
                | Error::SingularKkt(_)
                | Error::NotConverged(_)
                | Error::Cepstrum(_)
        )
    }
}
