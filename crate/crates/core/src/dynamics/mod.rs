//! Open-system evolution through the three-stage preparation protocol.
//!
//! The master equation in τ = ωt reads
//!
//! ```text
//! dρ/dτ = −i[H + H₁, ρ] + ½[z̃, ρÃ† − Ãρ]
//! ```
//!
//! with z̃ the position in zero-point units and Ã the thermal jump operator
//! built from the instantaneous eigenpairs.

mod bath;
mod integrator;
mod protocol;
mod state;
mod trajectory;

pub use bath::{jump_operator, thermal_occupation, BathParams};
pub use integrator::{evolve, StepPolicy, TRACE_DRIFT_LIMIT};
pub use protocol::{
    convergence_check, initial_thermal_state, run_protocol, run_stage2, run_stage3,
    ConvergenceReport, ProtocolConfig, ProtocolOutcome, Stage2Mode, Stage2Output, ZETA_HARMONIC,
};
pub use state::DensityMatrix;
pub use trajectory::{samples_from_csv, Sample, Trajectory};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// −i[H, ρ] + ½[z, ρA† − Aρ] with all operators in one basis.
///
/// A plain complex reference of the right-hand side; [`evolve`] uses an
/// equivalent real-split form.
pub fn rhs(
    rho: &DensityMatrix,
    h_total: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    z: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let dim = rho.dim();
    for m in [h_total, a, z] {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.nrows(),
            });
        }
    }
    let r = rho.matrix();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut out = (h_total * r - r * h_total) * minus_i;
    let w = r * a.adjoint() - a * r;
    out += (z * &w - &w * z) * Complex64::new(0.5, 0.0);
    Ok(out)
}
