//! Physical constants and the conversion between SI quantities and the
//! dimensionless model.
//!
//! Inside the simulator ħ = 1 and ω = 1: energies are in ħω, times in 1/ω,
//! and positions in the zero-point amplitude z_zpm = √(ħ/2mω).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Mass, frequency and Duffing coefficient of the mechanical mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitSystem {
    /// Effective modal mass, kg.
    pub mass: f64,
    /// Intrinsic harmonic frequency ω, rad/s.
    pub omega: f64,
    /// Duffing coefficient β, J/m⁴.
    pub beta: f64,
}

impl UnitSystem {
    pub fn new(mass: f64, omega: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("omega", omega), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { mass, omega, beta })
    }

    /// Dimensionless Duffing strength γ = βħ/(16 m² ω³).
    pub fn gamma(&self) -> f64 {
        crate::device::duffing_gamma(self.mass, self.omega, self.beta)
    }

    /// Zero-point amplitude √(ħ/2mω), metres.
    pub fn z_zpm(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega)).sqrt()
    }

    /// ħω / k_B in kelvin.
    pub fn quantum_temperature(&self) -> f64 {
        HBAR * self.omega / K_B
    }

    /// Seconds → units of 1/ω.
    pub fn to_dimensionless_time(&self, seconds: f64) -> f64 {
        seconds * self.omega
    }

    pub fn from_dimensionless_time(&self, tau: f64) -> f64 {
        tau / self.omega
    }

    pub fn micros_to_dimensionless(&self, micros: f64) -> f64 {
        self.to_dimensionless_time(micros * 1e-6)
    }
}

impl Default for UnitSystem {
    /// The graphene membrane of the reference device at ω/2π = 2 MHz.
    fn default() -> Self {
        let geom = crate::device::MembraneGeometry::default();
        let elastic = crate::device::elastic_params(&geom, 1, Some(REFERENCE_OMEGA))
            .expect("reference geometry is valid");
        Self {
            mass: elastic.mass,
            omega: elastic.omega,
            beta: elastic.beta,
        }
    }
}

/// ω = 2π · 2 MHz.
pub const REFERENCE_OMEGA: f64 = 2.0 * std::f64::consts::PI * 2.0e6;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_positive() {
        assert!(UnitSystem::new(0.0, 1.0, 1.0).is_err());
        assert!(UnitSystem::new(1.0, -1.0, 1.0).is_err());
        assert!(UnitSystem::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn gamma_is_recomputed_consistently() {
        let u = UnitSystem::default();
        let direct = u.beta * HBAR / (16.0 * u.mass.powi(2) * u.omega.powi(3));
        assert_relative_eq!(u.gamma(), direct, max_relative = 1e-12);
    }

    #[test]
    fn reference_device_scales() {
        let u = UnitSystem::default();
        // ħω/k_B for 2 MHz
        assert_relative_eq!(u.quantum_temperature(), 9.598e-5, max_relative = 1e-3);
        // z_zpm is of order a picometre
        assert!(u.z_zpm() > 1e-12 && u.z_zpm() < 2e-12);
        assert_relative_eq!(u.micros_to_dimensionless(0.1), 1.256_637, max_relative = 1e-6);
    }
}
