use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site index {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("partial trace needs at least one kept site")]
    EmptyKeepSet,
    #[error("site {0} listed more than once")]
    DuplicateSite(usize),
    #[error("coherence {magnitude:e} between excitation sectors exceeds tolerance")]
    InterSectorCoherence { magnitude: f64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("disorder offset {value} at site {site} outside [-1/2, 1/2]")]
    EpsilonOutOfRange { site: usize, value: f64 },
    #[error("disorder offsets only apply to disordered arrangements")]
    UnexpectedEpsilons,
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("invalid integrator settings: {0}")]
    InvalidIntegrator(String),
    #[error("invalid sample times: {0}")]
    InvalidSampleTimes(String),
    #[error("step size underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },
    #[error("step budget of {max_steps} exhausted at t = {time}")]
    TooManySteps { max_steps: usize, time: f64 },
    #[error("system with {n_sites} sites exceeds the limit of {limit} for this operation")]
    SystemTooLarge { n_sites: usize, limit: usize },
    #[error("eigen-decomposition did not converge")]
    EigenFailure,
    #[error("eigenvalue {value:e} below the clipping threshold")]
    Negativity { value: f64 },
    #[error("fit input: {0}")]
    FitInput(String),
    #[error("realization {index} (seed {seed:#018x}) failed: {source}")]
    Realization {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("ensemble summaries are incompatible: {0}")]
    IncompatibleSummaries(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
}
