//! Output spectrum of a weakly coupled, resonantly driven cavity.
//!
//! Each mechanical transition n → m appears as a Lorentzian at Ω = −δ_mn
//! weighted by κg²|z̃_mn|²/(κ²/4 + δ_mn²) and by the population ρ_nn, so
//! the sideband pattern fingerprints the mechanical state.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::dynamics::{thermal_occupation, BathParams};
use crate::error::{Error, Result};
use crate::spectral::EigenSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityParams {
    /// Cavity decay rate κ/ω.
    pub kappa: f64,
    /// Drive-enhanced coupling g/ω.
    pub g: f64,
    /// Lines narrower than this (units of ω) are drawn at this half-width.
    pub line_floor: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            g: 0.1,
            line_floor: 1e-6,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::invalid("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if !(self.g >= 0.0) {
            return Err(Error::invalid("g", format!("must be non-negative, got {}", self.g)));
        }
        if !(self.line_floor > 0.0) {
            return Err(Error::invalid("line_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Default axis: Ω/ω ∈ [−0.2, 0.2] at 4001 points.
pub fn default_axis() -> Vec<f64> {
    crate::analysis::linspace(-0.2, 0.2, 4001)
}

/// Decoherence rate Γ_mn of the transition between levels m and n.
///
/// Upward (m < n) transitions carry γ_mn N̄, downward ones γ_mn (N̄ + 1),
/// with γ_mn = |δ_mn z̃_mn| / Q and N̄ taken at |δ_mn|. A closed system has
/// no decoherence.
pub fn decoherence_rate(
    eig: &EigenSystem,
    m: usize,
    n: usize,
    bath: Option<&BathParams>,
) -> Result<f64> {
    let z = eig.position_elements();
    rate_from_elements(eig, &z, m, n, bath)
}

fn rate_from_elements(
    eig: &EigenSystem,
    z: &DMatrix<f64>,
    m: usize,
    n: usize,
    bath: Option<&BathParams>,
) -> Result<f64> {
    if m == n {
        return Err(Error::invalid("levels", format!("decoherence rate needs m != n, got {m}")));
    }
    let Some(bath) = bath else { return Ok(0.0) };
    bath.validate()?;
    let delta = eig.gap(m, n).abs();
    if delta == 0.0 {
        return Ok(0.0);
    }
    let gamma = delta / bath.quality_factor * z[(m, n)].abs();
    let nbar = thermal_occupation(delta, bath)?;
    Ok(if m < n { gamma * nbar } else { gamma * (nbar + 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLine {
    /// Final level.
    pub m: usize,
    /// Populated initial level.
    pub n: usize,
    /// δ_mn = E_m − E_n.
    pub delta: f64,
    /// Lorentzian area, including ρ_nn.
    pub weight: f64,
    /// Half-width before the floor is applied.
    pub gamma: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub omega_axis: Vec<f64>,
    pub values: Vec<f64>,
    pub lines: Vec<SpectrumLine>,
}

/// S(Ω) on `omega_axis` for level populations ρ_nn of `eig`.
pub fn output_spectrum(
    populations: &[f64],
    eig: &EigenSystem,
    cavity: &CavityParams,
    bath: Option<&BathParams>,
    omega_axis: &[f64],
) -> Result<SpectrumResult> {
    cavity.validate()?;
    if populations.len() > eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            found: populations.len(),
        });
    }
    if omega_axis.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("omega_axis", "must be finite"));
    }
    if populations.iter().any(|p| *p < -1e-8) {
        return Err(Error::invalid("populations", "must be non-negative"));
    }
    let z = eig.position_elements();
    let k = cavity.kappa;
    let mut lines = Vec::new();
    for (n, &p) in populations.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        for m in 0..eig.dim() {
            if m == n {
                continue;
            }
            let delta = eig.gap(m, n);
            let strength = k * cavity.g * cavity.g * z[(m, n)] * z[(m, n)] / (k * k / 4.0 + delta * delta);
            lines.push(SpectrumLine {
                m,
                n,
                delta,
                weight: strength * p,
                gamma: rate_from_elements(eig, &z, m, n, bath)?,
                center: -delta,
            });
        }
    }
    let floor = cavity.line_floor;
    let values = omega_axis
        .par_iter()
        .map(|&w| {
            lines
                .iter()
                .filter(|l| l.weight > 0.0)
                .map(|l| l.weight * lorentzian(w, l.center, l.gamma.max(floor)))
                .sum()
        })
        .collect();
    Ok(SpectrumResult {
        omega_axis: omega_axis.to_vec(),
        values,
        lines,
    })
}

/// Unit-area Lorentzian with half-width `hw`.
pub fn lorentzian(w: f64, center: f64, hw: f64) -> f64 {
    let d = w - center;
    hw / std::f64::consts::PI / (d * d + hw * hw)
}

impl SpectrumResult {
    /// Local maxima as (Ω, S), highest first.
    pub fn peaks(&self) -> Vec<(f64, f64)> {
        let v = &self.values;
        let mut out: Vec<(f64, f64)> = (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
            .map(|i| (self.omega_axis[i], v[i]))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,s\n");
        for (w, s) in self.omega_axis.iter().zip(&self.values) {
            let _ = writeln!(out, "{w:.17e},{s:.17e}");
        }
        out
    }

    pub fn lines_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.lines)
    }
}
