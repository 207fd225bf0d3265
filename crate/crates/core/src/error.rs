use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this library, split into configuration
/// errors (bad inputs) and numerical-precondition failures (the requested
/// analysis is not defined for the supplied regime). Callers that need to
/// distinguish the two classes can use [`Error::is_precondition`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("state n = {n} out of range 0..={n_max}")]
    StateOutOfRange { n: usize, n_max: usize },

    #[error("inconsistent flip: no agent with decision {s:+} exists in state n = {n} of {n_max}")]
    InconsistentFlip { s: i8, n: usize, n_max: usize },

    #[error("critical rationality is undefined for coupling J <= 0")]
    NoPhaseTransition,

    #[error("chain is reducible: {0}")]
    ReducibleChain(String),

    #[error("spectrum inconsistent: raw leading eigenvalue {lambda1:e} exceeds tolerance {tol:e}")]
    SpectrumInconsistent { lambda1: f64, tol: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("schedule covers t <= {t_end}, cannot evolve to t = {t}")]
    ScheduleExceeded { t: f64, t_end: f64 },

    #[error("no metastable structure: {0}")]
    NoMetastability(String),

    #[error("single-equilibrium regime: {0}")]
    SingleEquilibrium(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset row {line}: {msg}")]
    DatasetRow { line: usize, msg: String },

    #[error("invalid dataset: {0}")]
    DatasetInvalid(String),

    #[error("error metric undefined: {0}")]
    UndefinedMetric(String),
}

impl Error {
    /// True for failures of a numerical precondition (well-formed input, but
    /// the requested analysis does not exist in this regime), as opposed to
    /// malformed input. The CLI maps the former to exit code 2 and the
    /// latter to exit code 1.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::NoPhaseTransition
                | Error::ReducibleChain(_)
                | Error::SpectrumInconsistent { .. }
                | Error::NoMetastability(_)
                | Error::SingleEquilibrium(_)
        )
    }
}
