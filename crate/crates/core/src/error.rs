use thiserror::Error;

/// Errors raised by the integrators and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A coefficient denominator (2 - nu, or 1 + tau - nu) vanished.
    #[error("nu={nu} degenerate: {what} is {value:e}")]
    DegenerateDenominator {
        what: &'static str,
        nu: f64,
        value: f64,
    },

    #[error("invalid step ratio tau={0}; must be positive")]
    InvalidRatio(f64),

    #[error("Newton iteration did not converge at t={t} after {iters} iterations")]
    NonConvergence { t: f64, iters: usize },

    #[error("singular Newton matrix at t={t}")]
    SingularJacobian { t: f64 },

    #[error("step size underflow at t={t} (k={k:e})")]
    StepUnderflow { t: f64, k: f64 },

    #[error("sigma vanishes on the unit circle at phi={phi}")]
    SigmaVanishes { phi: f64 },

    #[error("characteristic polynomial vanishes identically at z={re}{im:+}i")]
    DegeneratePolynomial { re: f64, im: f64 },
}

impl Error {
    /// True for failures of the numerical solve rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::SingularJacobian { .. } | Error::StepUnderflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
