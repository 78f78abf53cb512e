use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::EigenSystem;
use crate::units::UnitSystem;

/// Thermal environment of the mechanical mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathParams {
    /// Kelvin.
    pub temperature: f64,
    pub quality_factor: f64,
    pub unit: UnitSystem,
}

impl Default for BathParams {
    fn default() -> Self {
        Self {
            temperature: 15e-3,
            quality_factor: 1e6,
            unit: UnitSystem::default(),
        }
    }
}

impl BathParams {
    pub fn new(temperature: f64, quality_factor: f64) -> Result<Self> {
        let b = Self {
            temperature,
            quality_factor,
            ..Self::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("must be non-negative, got {}", self.temperature),
            ));
        }
        if !(self.quality_factor > 0.0) {
            return Err(Error::invalid(
                "quality_factor",
                format!("must be positive, got {}", self.quality_factor),
            ));
        }
        Ok(())
    }
}

/// Bose occupation of a transition of frequency `delta` (units of ω).
pub fn thermal_occupation(delta: f64, bath: &BathParams) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    if bath.temperature == 0.0 {
        return Ok(0.0);
    }
    let x = delta * bath.unit.quantum_temperature() / bath.temperature;
    Ok(1.0 / x.exp_m1())
}

/// Thermal jump operator in the computational basis of `eig`.
///
/// Built from eigenpairs m > n with rate γ̃_mn = δ_mn z̃_mn / Q. It is real
/// because the eigenvectors are. Exactly degenerate pairs carry no rate.
pub fn jump_operator(eig: &EigenSystem, bath: &BathParams) -> Result<DMatrix<f64>> {
    Ok(eig.from_eigenbasis(&jump_operator_eigenbasis(eig, &eig.position_elements(), bath)?))
}

pub(crate) fn jump_operator_eigenbasis(
    eig: &EigenSystem,
    z: &DMatrix<f64>,
    bath: &BathParams,
) -> Result<DMatrix<f64>> {
    bath.validate()?;
    let dim = eig.dim();
    let mut a = DMatrix::zeros(dim, dim);
    if bath.quality_factor.is_infinite() {
        return Ok(a);
    }
    for m in 0..dim {
        for n in 0..m {
            let delta = eig.gap(m, n);
            if delta <= 0.0 {
                continue;
            }
            let rate = delta / bath.quality_factor * z[(m, n)];
            if rate == 0.0 {
                continue;
            }
            let nbar = thermal_occupation(delta, bath)?;
            a[(m, n)] += rate * nbar;
            a[(n, m)] += rate * (nbar + 1.0);
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn occupation_values() {
        let cold = BathParams::new(0.0, 1e6).unwrap();
        assert_eq!(thermal_occupation(1.0, &cold).unwrap(), 0.0);
        let bath = BathParams::default();
        let tq = bath.unit.quantum_temperature();
        let oracle = 1.0 / ((tq / 15e-3).exp() - 1.0);
        assert_relative_eq!(thermal_occupation(1.0, &bath).unwrap(), oracle, max_relative = 1e-12);
        assert_relative_eq!(oracle, 155.78, max_relative = 1e-3);
        assert!(thermal_occupation(0.0, &bath).is_err());
        assert!(thermal_occupation(-1.0, &bath).is_err());
        assert_eq!(thermal_occupation(1e6, &bath).unwrap(), 0.0);
    }

    #[test]
    fn invalid_bath() {
        assert!(BathParams::new(-1.0, 1e6).is_err());
        assert!(BathParams::new(0.01, 0.0).is_err());
    }
}
