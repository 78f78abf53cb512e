//! Preparation and verification of cat states in a double-well Duffing
//! resonator using counterdiabatic shortcuts to adiabaticity.
//!
//! The resonator starts near the ground state of its harmonic trap. An
//! electrostatic control ζ(t) softens the trap through the buckling point
//! into a shallow double well whose ground state is a spatial superposition.
//! Counterdiabatic drives on the even-parity transitions suppress the
//! excitations that a fast ramp would otherwise cause.
//!
//! Internally ħ = ω = 1: energies are in ħω, times in 1/ω and positions in
//! the zero-point amplitude. [`units::UnitSystem`] converts at the boundary.
//!
//! ```
//! use dwcat::spectral::{build_basis, BasisPolicy, EigenSystem, PotentialParams};
//! use dwcat::units::UnitSystem;
//!
//! let gamma = UnitSystem::default().gamma();
//! let params = PotentialParams::new(3e-4, gamma, 0.0)?;
//! let basis = build_basis(params.zeta, &BasisPolicy::default())?;
//! let eig = EigenSystem::solve(&params, &basis)?;
//! assert!(eig.gap(1, 0) < 1e-4);
//! # Ok::<(), dwcat::Error>(())
//! ```

pub mod analysis;
pub mod control;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod readout;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};

// Book chapters are compiled as doc-tests so their snippets stay runnable.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    pub mod spectrum {}
    #[doc = include_str!("../../../book/src/ramps.md")]
    pub mod ramps {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    pub mod analysis {}
    #[doc = include_str!("../../../book/src/readout.md")]
    pub mod readout {}
    #[doc = include_str!("../../../book/src/device.md")]
    pub mod device {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}
