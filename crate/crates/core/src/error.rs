use num_complex::Complex64;
use thiserror::Error;

use crate::scheme::SpectralState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    /// The initial velocity does not integrate to zero over one period.
    #[error("initial velocity u1 has nonzero mean: integral = {integral:.3e} (tolerance {tolerance:.3e})")]
    NonZeroMean { integral: f64, tolerance: f64 },

    /// The time march produced non-finite or overflowing coefficients.
    #[error("solution blew up at t = {time} (last finite state at t = {})", last_finite.t)]
    BlowUp {
        time: f64,
        last_finite: Box<SpectralState>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    /// An eigenfunction column grew beyond what the marching solver can represent.
    #[error("ill-conditioned solve at k = {k}: column {column} grew by {growth:.3e}")]
    Conditioning {
        k: Complex64,
        column: usize,
        growth: f64,
    },

    /// Spectral data contradicts an identity the theory guarantees.
    #[error("data inconsistency: {0}")]
    DataInconsistency(String),

    #[error("norming constant proportionality spread {spread:.3e} exceeds {tolerance:.1e}")]
    NormingSpread { spread: f64, tolerance: f64 },

    #[error("f_k0^2 = {value} is not real-positive (relative imaginary part {relative_imag:.3e})")]
    SymmetryViolation {
        value: Complex64,
        relative_imag: f64,
    },

    #[error("no square-root branch satisfies the sign condition at zeta = {zeta}")]
    Branch { zeta: f64 },

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::NonZeroMean { .. } | Error::Json(_) => 2,
            Error::BlowUp { .. } => 3,
            Error::MissingPrerequisite(_) => 4,
            _ => 1,
        }
    }
}
