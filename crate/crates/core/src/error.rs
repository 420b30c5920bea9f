use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("could not place atom {atom} of {total} after {attempts} attempts (exclusion distance {min_separation})")]
    Placement {
        atom: usize,
        total: usize,
        attempts: usize,
        min_separation: f64,
    },

    #[error("kernel evaluated outside its domain: {0}")]
    KernelDomain(String),

    #[error("size mismatch: expected {expected} atoms, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("step size underflow at t = {t} (h = {h}, max |y| = {max_abs_state})")]
    StepSizeUnderflow { t: f64, h: f64, max_abs_state: f64 },

    #[error("step budget of {steps} exhausted at t = {t}")]
    TooManySteps { t: f64, steps: usize },

    #[error("integration produced a non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("steady state not reached by t = {t_max}: residual {residual:e} (target {target:e})")]
    NotConverged {
        t_max: f64,
        residual: f64,
        target: f64,
        /// `(t, max-norm of the derivative)` samples along the run.
        history: Vec<(f64, f64)>,
    },

    #[error("observation point lies within the exclusion distance of atom {atom}")]
    Singularity { atom: usize },

    #[error("no transparency window: {0}")]
    Shape(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("realization {realization} at delta1 = {delta1}: {source}")]
    Task {
        realization: usize,
        delta1: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Innermost error, with any task tagging stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Task { source, .. } => source.root(),
            e => e,
        }
    }
}
