use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("array shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: [usize; 3],
        found: [usize; 3],
    },

    #[error("drive direction {s_drive} contradicts the interval [{e0}, {e}]")]
    BranchDirection { s_drive: i8, e0: f64, e: f64 },

    #[error("quadrature did not reach the requested tolerance (estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("no closed cycle found in trace: {0}")]
    NoClosedCycle(String),

    #[error("negative branch susceptibility {0:e}: kappa must be >= |theta|")]
    NegativeSusceptibility(f64),

    #[error("numerical abort at step {step} (t = {time:e} s): {reason}")]
    NumericalAbort {
        step: u64,
        time: f64,
        reason: String,
        snapshot: Option<PathBuf>,
    },

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("config key `{key}`: {reason}")]
    ConfigValue { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the run configuration rather than by the
    /// numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::ConfigSyntax { .. } | Error::ConfigValue { .. }
        )
    }
}
