use thiserror::Error;

/// Errors raised by the dynamical model, the propagators and the correctors.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("mass parameter {0} is outside [0, 1/2]")]
    MassOutOfRange(f64),

    #[error("collision with the tertiary (|r| = {r:e})")]
    Collision { r: f64 },

    #[error("spectrum at L3 is complex for mu = {mu} (critical mass {mu_critical})")]
    ComplexSpectrum { mu: f64, mu_critical: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Propagation came closer to the tertiary than the escalation radius.
    /// The state at the moment of escape is carried so callers can switch
    /// to regularized propagation.
    #[error("close approach to the tertiary at t = {t} (|r| = {r:e})")]
    CloseApproach { t: f64, r: f64, state: [f64; 4] },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("event not found before t = {0}")]
    EventNotFound(f64),

    #[error("corrector diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("branch not found: {0}")]
    BranchNotFound(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
