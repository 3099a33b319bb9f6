use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the crate.
///
/// The CLI maps the variants onto distinct exit codes, so new variants should
/// be slotted into [`Error::class`] as well.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown dimension tag `{0}`")]
    UnknownDimension(String),

    #[error("ions {0} and {1} coincide")]
    Singularity(usize, usize),

    #[error("instability: {0}")]
    Instability(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("time-reversal symmetry violated: imaginary residue {residue:.3e} >= {tol:.3e}")]
    SymmetryViolation { residue: f64, tol: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("series budget exhausted after {terms} terms (dropped bound {bound:.3e})")]
    BudgetExhausted { terms: usize, bound: f64 },

    #[error("Bessel cutoff {n_max} too small for phase amplitude {phi:.4}")]
    BesselCutoff { n_max: usize, phi: f64 },

    #[error("ion collision at t = {time:.6} (distance {distance:.3e})")]
    Collision { time: f64, distance: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Instability,
    NonConvergence,
    Other,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::UnknownDimension(_) => {
                ErrorClass::Config
            }
            Error::Instability(_) | Error::Collision { .. } => ErrorClass::Instability,
            Error::NonConvergence(_)
            | Error::Singular(_)
            | Error::SymmetryViolation { .. }
            | Error::BudgetExhausted { .. }
            | Error::BesselCutoff { .. } => ErrorClass::NonConvergence,
            Error::Singularity(..) | Error::Format(_) | Error::Io(_) => ErrorClass::Other,
        }
    }
}
