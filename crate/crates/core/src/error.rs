use thiserror::Error;

/// Errors raised by the numerical routines and audits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("no finite scale satisfies the Orlicz constraint")]
    NonIntegrable,
    #[error("the delta-2 constant diverges on the grid")]
    Delta2Divergent,
    #[error("conjugate is unbounded at x = {x}")]
    Unbounded { x: f64 },
    #[error("support ({a}, {b}) is empty after margin clamping")]
    EmptySupport { a: f64, b: f64 },
    #[error("moment functions have no common support")]
    NoCommonSupport,
    #[error("support lower endpoint {a} does not exceed theta = {theta}")]
    SupportBelowTheta { a: f64, theta: f64 },
    #[error("Kramer condition violated at lambda = {lambda}")]
    KramerViolation { lambda: f64 },
    #[error("symbol is not invertible on the requested range")]
    NotInvertible,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite term in {0}")]
    NonFinite(String),
    #[error("ball of zero mass around point {center} at radius {radius}")]
    ZeroMass { center: usize, radius: f64 },
    #[error("exponent p = {p} must exceed {p0}")]
    ExponentRange { p: f64, p0: f64 },
    #[error("covariance is not positive semidefinite within the jitter budget")]
    NotPsd,
    #[error("moment order {p} is outside the model's moment range")]
    MomentRange { p: f64 },
    #[error("need {needed} replicas, have {available}")]
    InsufficientReplicas { needed: usize, available: usize },
    #[error("moment generating function overflows at lambda = {lambda}")]
    MgfOverflow { lambda: f64 },
    #[error("gamma function has empty effective support")]
    GammaNotPsi,
    #[error("distance fails the embedding check: {0}")]
    EmbeddingFailed(String),
    #[error("V functional is not finite")]
    VNonFinite,
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics themselves rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd
                | Error::NonIntegrable
                | Error::NonFinite(_)
                | Error::MgfOverflow { .. }
                | Error::NotInvertible
                | Error::VNonFinite
                | Error::Delta2Divergent
                | Error::KramerViolation { .. }
                | Error::GammaNotPsi
                | Error::Unbounded { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
