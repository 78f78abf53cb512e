use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis was built for zeta = {basis_zeta} but the Hamiltonian asks for zeta = {zeta}")]
    BasisMismatch { basis_zeta: f64, zeta: f64 },

    #[error("eigendecomposition did not converge (dim = {dim})")]
    Diagonalization { dim: usize },

    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("levels {n} and {m} are degenerate (gap {gap:e}) but coupled by {coupling:e}")]
    DegenerateCoupling {
        n: usize,
        m: usize,
        gap: f64,
        coupling: f64,
    },

    #[error("level {level} is incomparable: E_high + E_low = 0")]
    IncomparableLevel { level: usize },

    #[error("time {t} lies outside the stage window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("state is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("integrator needs {required} steps, above the cap of {cap}")]
    StepUnderflow { required: usize, cap: usize },

    #[error("invariant `{invariant}` violated at t = {time}: {value:e}")]
    InvariantViolation {
        invariant: &'static str,
        time: f64,
        value: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diagonalization { .. }
                | Error::NotPositive { .. }
                | Error::StepUnderflow { .. }
                | Error::InvariantViolation { .. }
                | Error::DegenerateCoupling { .. }
        )
    }
}
