use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// One entry per violated invariant, see [`crate::validate_scenario`].
    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("scenario file: {0}")]
    Scenario(String),

    #[error("singular Numerov step matrix at step {step}: h too large for the local energy scale")]
    SingularStep { step: usize },

    #[error("conditioning: {0}")]
    Conditioning(String),

    #[error("quadrature failure: non-finite integrand at x = {x}, xi = {xi}")]
    Quadrature { x: f64, xi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("energy within 1e-9 of threshold {threshold} (E = {energy})")]
    ThresholdProximity { energy: f64, threshold: f64 },

    #[error("no open channel at E = {0}")]
    NoOpenChannel(f64),

    #[error("ill-conditioned matching (condition number {0:e})")]
    IllConditioned(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
