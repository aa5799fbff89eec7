use thiserror::Error;

/// Errors raised by the numerical and simulation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("quadrature diverges: {0}")]
    QuadratureDivergence(String),

    #[error("quadrature inconclusive: {0}")]
    QuadratureInconclusive(String),

    #[error("quadrature budget exhausted on [{lo}, {hi}] (estimate {estimate:e}, error {error:e})")]
    QuadratureBudget {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },

    #[error("integrand is not finite at {0}")]
    NonFinite(f64),

    #[error("integrability failure: {0}")]
    IntegrabilityFailure(String),

    #[error("log-moment condition fails: {0}")]
    LogMomentFailure(String),

    #[error("kernel is not in L1: {0}")]
    NotL1(String),

    #[error("basis is not centered: {0}")]
    NotCentered(String),

    #[error("expected jump count {expected:e} per cell exceeds 1e6; lower the cut or refine ds")]
    JumpRateOverflow { expected: f64 },

    #[error("singular kernel cell cannot be integrated: {0}")]
    SingularCellOverflow(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
