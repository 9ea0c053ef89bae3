use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode ladder: {0}")]
    InvalidLadder(String),

    #[error("mode index {index} out of range 1..={n_modes}")]
    ModeOutOfRange { index: usize, n_modes: usize },

    #[error("invalid mode pair (j = {j}, k = {k}): {reason}")]
    InvalidModePair {
        j: usize,
        k: usize,
        reason: &'static str,
    },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("unknown {what} `{name}` (available: {available})")]
    UnknownStrategy {
        what: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid initial condition: {0}")]
    InvalidInitialCondition(String),

    #[error("dimension mismatch: expected {expected} modes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite occupation {value} at mode {mode}")]
    NonFinite { mode: usize, value: f64 },

    #[error("negative occupation {value} at mode {mode}")]
    NegativeOccupation { mode: usize, value: f64 },

    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),

    #[error("step size underflow at tau = {tau}: step {step:e} fell below min_step {min_step:e} (problem too stiff for the explicit integrator)")]
    StepUnderflow { tau: f64, step: f64, min_step: f64 },

    #[error("non-finite state produced at tau = {tau}")]
    NonFiniteState { tau: f64 },

    #[error("step limit of {0} exceeded")]
    TooManySteps(usize),

    #[error("target energy {u_target} out of range: must lie in (0, {cap:e}) for this ladder")]
    EnergyOutOfRange { u_target: f64, cap: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}
