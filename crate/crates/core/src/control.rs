//! Ramp schedules for ζ(t) and counterdiabatic drive synthesis.
//!
//! All drives built here are of the form H₁ = iG with G real and
//! antisymmetric in the (real) computational basis, because the eigenvectors
//! of the double-well Hamiltonian are real. [`DriveHamiltonian`] stores G.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::spectral::{EigenSystem, Operators};

/// Smallest |δ_mn| a drive term may divide by.
pub const MIN_GAP: f64 = 1e-12;
/// Couplings below this across a degenerate pair are treated as 0/0 = 0.
pub const NEGLIGIBLE_COUPLING: f64 = 1e-14;
/// Normalized time below which the sqrt ramp's rate is held constant.
const SQRT_TAU_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    Linear,
    Sqrt,
    Sine,
    GapAdapted,
}

impl std::str::FromStr for RampKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RampKind::Linear),
            "sqrt" => Ok(RampKind::Sqrt),
            "sine" => Ok(RampKind::Sine),
            "gap_adapted" => Ok(RampKind::GapAdapted),
            other => Err(Error::invalid(
                "ramp",
                format!("unknown kind `{other}` (linear, sqrt, sine, gap_adapted)"),
            )),
        }
    }
}

/// ζ(t) over one protocol stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub kind: RampKind,
    pub zeta_start: f64,
    pub zeta_end: f64,
    pub duration: f64,
    pub t_start: f64,
}

impl RampSchedule {
    pub fn new(
        kind: RampKind,
        zeta_start: f64,
        zeta_end: f64,
        duration: f64,
        t_start: f64,
    ) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
        }
        if !zeta_start.is_finite() || !zeta_end.is_finite() || !t_start.is_finite() {
            return Err(Error::invalid("ramp", "endpoints must be finite"));
        }
        if kind == RampKind::GapAdapted
            && !(zeta_start * zeta_end > 0.0)
        {
            // 1/ζ interpolation needs both ends on the same side of zero
            return Err(Error::invalid(
                "ramp",
                "gap_adapted endpoints must be nonzero and of equal sign",
            ));
        }
        Ok(Self {
            kind,
            zeta_start,
            zeta_end,
            duration,
            t_start,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// (ζ, dζ/dt) at absolute time `t`.
    pub fn value(&self, t: f64) -> Result<(f64, f64)> {
        let slack = 1e-12 * self.duration.max(self.t_end().abs());
        if !(t >= self.t_start - slack && t <= self.t_end() + slack) {
            return Err(Error::OutsideWindow {
                t,
                start: self.t_start,
                end: self.t_end(),
            });
        }
        let tau = ((t - self.t_start) / self.duration).clamp(0.0, 1.0);
        let d = self.zeta_end - self.zeta_start;
        let big_t = self.duration;
        let (zeta, rate) = match self.kind {
            RampKind::Linear => (self.zeta_start + d * tau, d / big_t),
            RampKind::Sqrt => {
                let rate_tau = tau.max(SQRT_TAU_FLOOR);
                (self.zeta_start + d * tau.sqrt(), d / (2.0 * big_t * rate_tau.sqrt()))
            }
            RampKind::Sine => {
                let s = (FRAC_PI_2 * tau).sin();
                let u_dot = FRAC_PI_2 * (2.0 * FRAC_PI_2 * tau).sin() / big_t;
                (self.zeta_start + d * s * s, d * u_dot)
            }
            RampKind::GapAdapted => {
                // 1/ζ runs along a sin² profile, so ζ̇ ∝ ζ² slows the sweep as
                // the gap closes and vanishes at both ends.
                let s = (FRAC_PI_2 * tau).sin();
                let u = s * s;
                let u_dot = FRAC_PI_2 * (2.0 * FRAC_PI_2 * tau).sin() / big_t;
                let inv_d = 1.0 / self.zeta_end - 1.0 / self.zeta_start;
                let zeta = 1.0 / (1.0 / self.zeta_start + inv_d * u);
                (zeta, -zeta * zeta * inv_d * u_dot)
            }
        };
        // exact endpoints
        let zeta = if tau == 0.0 {
            self.zeta_start
        } else if tau == 1.0 {
            self.zeta_end
        } else {
            zeta
        };
        Ok((zeta, rate))
    }
}

pub fn ramp_value(schedule: &RampSchedule, t: f64) -> Result<(f64, f64)> {
    schedule.value(t)
}

/// Even-level pairs (n, m), n < m, that receive a counterdiabatic term.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSet {
    pairs: Vec<(usize, usize)>,
}

impl TransitionSet {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (n, m) in pairs {
            if n % 2 != 0 || m % 2 != 0 {
                return Err(Error::invalid(
                    "transitions",
                    format!("pair ({n}, {m}) has an odd level"),
                ));
            }
            let pair = match n.cmp(&m) {
                std::cmp::Ordering::Less => (n, m),
                std::cmp::Ordering::Greater => (m, n),
                std::cmp::Ordering::Equal => {
                    return Err(Error::invalid("transitions", format!("pair ({n}, {m}) is diagonal")))
                }
            };
            out.push(pair);
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { pairs: out })
    }

    /// No drive at all.
    pub fn empty() -> Self {
        Self::default()
    }

    /// All even pairs with n < m ≤ `level`.
    pub fn up_to(level: usize) -> Self {
        let evens: Vec<usize> = (0..=level).step_by(2).collect();
        let mut pairs = Vec::new();
        for (i, &n) in evens.iter().enumerate() {
            for &m in &evens[i + 1..] {
                pairs.push((n, m));
            }
        }
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_level(&self) -> Option<usize> {
        self.pairs.iter().map(|p| p.1).max()
    }
}

/// H₁ = iG in the computational basis of the eigensystem it came from.
#[derive(Debug, Clone)]
pub struct DriveHamiltonian {
    /// Real antisymmetric G.
    pub generator: DMatrix<f64>,
    pub zeta: f64,
    /// dζ/dt the drive was built for; `None` for a generic ∂ₜH₀.
    pub zeta_dot: Option<f64>,
}

impl DriveHamiltonian {
    pub fn zero(dim: usize, zeta: f64) -> Self {
        Self {
            generator: DMatrix::zeros(dim, dim),
            zeta,
            zeta_dot: Some(0.0),
        }
    }

    /// The complex Hermitian matrix iG.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        self.generator.map(|g| Complex64::new(0.0, g))
    }

    /// Largest |H₁|ᵢⱼ.
    pub fn max_abs(&self) -> f64 {
        self.generator.amax()
    }
}

fn check_basis(eig: &EigenSystem, op: &DMatrix<f64>) -> Result<()> {
    if op.nrows() != eig.dim() || op.ncols() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            found: op.nrows(),
        });
    }
    Ok(())
}

/// Full transitionless drive H₁ = i Σ_{n≠m} |n⟩⟨n|∂ₜH₀|m⟩⟨m| / (E_m − E_n).
///
/// `dh_dt` is given in the computational basis, in ħω per 1/ω.
pub fn cd_full(eig: &EigenSystem, dh_dt: &DMatrix<f64>) -> Result<DriveHamiltonian> {
    check_basis(eig, dh_dt)?;
    let coupling = eig.to_eigenbasis(dh_dt);
    let dim = eig.dim();
    let mut g = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        for m in 0..dim {
            if n == m {
                continue;
            }
            let gap = eig.gap(m, n);
            let c = coupling[(n, m)];
            if gap.abs() < MIN_GAP {
                if c.abs() > NEGLIGIBLE_COUPLING {
                    return Err(Error::DegenerateCoupling {
                        n,
                        m,
                        gap,
                        coupling: c,
                    });
                }
                continue;
            }
            g[(n, m)] = c / gap;
        }
    }
    Ok(DriveHamiltonian {
        generator: antisymmetrize(eig.from_eigenbasis(&g)),
        zeta: eig.zeta,
        zeta_dot: None,
    })
}

/// Even-subspace drive −(i/4)ζ̇ Σ_{(n,m)∈set} (⟨n|z̃²|m⟩/δ_mn)|n⟩⟨m| + h.c.
///
/// This is [`cd_full`] for ∂ₜH₀ = −ζ̇z̃²/4 restricted to the listed pairs.
/// The eigenvectors' individual signs cancel in every term, so no phase
/// alignment is needed.
pub fn cd_even_truncated(
    eig: &EigenSystem,
    zeta_dot: f64,
    set: &TransitionSet,
) -> Result<DriveHamiltonian> {
    let dim = eig.dim();
    if zeta_dot == 0.0 || set.is_empty() {
        return Ok(DriveHamiltonian::zero(dim, eig.zeta));
    }
    if let Some(top) = set.max_level() {
        if top >= dim {
            return Err(Error::invalid(
                "transitions",
                format!("level {top} exceeds the truncation {dim}"),
            ));
        }
    }
    let ops = Operators::new(eig.basis.dim);
    let z2 = ops.position_squared(eig.basis.omega0);
    let mut g = DMatrix::zeros(dim, dim);
    for &(n, m) in set.pairs() {
        let gap = eig.gap(m, n);
        if gap.abs() < MIN_GAP {
            return Err(Error::DegenerateCoupling {
                n,
                m,
                gap,
                coupling: f64::NAN,
            });
        }
        let vn = eig.state(n);
        let vm = eig.state(m);
        let z2_nm = vn.dot(&(&z2 * vm));
        let v = -0.25 * zeta_dot * z2_nm / gap;
        // outer products v·(|n⟩⟨m| − |m⟩⟨n|)
        for i in 0..dim {
            for j in 0..dim {
                g[(i, j)] += v * (vn[i] * vm[j] - vm[i] * vn[j]);
            }
        }
    }
    Ok(DriveHamiltonian {
        generator: g,
        zeta: eig.zeta,
        zeta_dot: Some(zeta_dot),
    })
}

/// ∂ₜH₀ = −ζ̇z̃²/4 in the computational basis of `eig`.
pub fn control_derivative(eig: &EigenSystem, zeta_dot: f64) -> DMatrix<f64> {
    let ops = Operators::new(eig.basis.dim);
    ops.position_squared(eig.basis.omega0) * (-0.25 * zeta_dot)
}

fn antisymmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m - m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, BasisPolicy, PotentialParams};
    use approx::assert_relative_eq;

    const GAMMA: f64 = 3.085_919_167_308_184e-8;

    fn eig_at(zeta: f64, xi: f64) -> EigenSystem {
        let basis = build_basis(zeta, &BasisPolicy::default()).unwrap();
        EigenSystem::solve(&PotentialParams::new(zeta, GAMMA, xi).unwrap(), &basis).unwrap()
    }

    #[test]
    fn sine_endpoints_are_flat() {
        let r = RampSchedule::new(RampKind::Sine, -2.5e-4, 3e-4, 110.0, 5.0).unwrap();
        assert_eq!(r.value(5.0).unwrap(), (-2.5e-4, 0.0));
        let (z, zd) = r.value(115.0).unwrap();
        assert_eq!(z, 3e-4);
        assert!(zd.abs() < 1e-20);
        assert!(r.value(4.0).is_err());
        assert!(r.value(116.0).is_err());
    }

    #[test]
    fn linear_rate() {
        let r = RampSchedule::new(RampKind::Linear, -2.5e-4, 3e-4, 110.0, 0.0).unwrap();
        for t in [0.0, 13.0, 110.0] {
            assert_relative_eq!(r.value(t).unwrap().1, 5e-6, max_relative = 1e-12);
        }
    }

    #[test]
    fn gap_adapted_is_monotone_and_slows() {
        let r = RampSchedule::new(RampKind::GapAdapted, -1.0, -2.5e-4, 1.0, 0.0).unwrap();
        let mut prev = r.value(0.0).unwrap().0;
        assert_eq!(prev, -1.0);
        for i in 1..=100 {
            let z = r.value(i as f64 / 100.0).unwrap().0;
            assert!(z > prev);
            prev = z;
        }
        assert_eq!(prev, -2.5e-4);
        let early = r.value(0.3).unwrap().1;
        let late = r.value(0.9).unwrap().1;
        assert!(late.abs() < early.abs());
        assert!(RampSchedule::new(RampKind::GapAdapted, -1.0, 3e-4, 1.0, 0.0).is_err());
    }

    #[test]
    fn rates_match_finite_differences() {
        for kind in [RampKind::Linear, RampKind::Sqrt, RampKind::Sine, RampKind::GapAdapted] {
            let r = RampSchedule::new(kind, -0.5, -0.01, 7.0, 1.0).unwrap();
            for t in [1.5, 3.0, 6.9] {
                let h = 1e-6;
                let fd = (r.value(t + h).unwrap().0 - r.value(t - h).unwrap().0) / (2.0 * h);
                assert_relative_eq!(r.value(t).unwrap().1, fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn transition_sets() {
        assert_eq!(TransitionSet::up_to(4).pairs(), &[(0, 2), (0, 4), (2, 4)]);
        assert_eq!(TransitionSet::up_to(2).pairs(), &[(0, 2)]);
        assert_eq!(TransitionSet::up_to(8).pairs().len(), 10);
        let s = TransitionSet::new([(2, 0), (0, 2), (0, 4)]).unwrap();
        assert_eq!(s.pairs(), &[(0, 2), (0, 4)]);
        assert!(TransitionSet::new([(0, 1)]).is_err());
        assert!(TransitionSet::new([(2, 2)]).is_err());
    }

    #[test]
    fn zero_rate_gives_zero_drive() {
        let eig = eig_at(0.0, 0.0);
        assert_eq!(cd_even_truncated(&eig, 0.0, &TransitionSet::up_to(4)).unwrap().max_abs(), 0.0);
        let zero = DMatrix::zeros(eig.dim(), eig.dim());
        assert_eq!(cd_full(&eig, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn up_to_four_has_six_entries_in_eigenbasis() {
        let eig = eig_at(0.0, 0.0);
        let drv = cd_even_truncated(&eig, 1e-5, &TransitionSet::up_to(4)).unwrap();
        let g = eig.to_eigenbasis(&drv.generator);
        let big = g.amax();
        let count = g.iter().filter(|v| v.abs() > 1e-9 * big).count();
        assert_eq!(count, 6);
        for i in 0..eig.dim() {
            assert!(g[(i, i)].abs() < 1e-12 * big);
        }
    }

    #[test]
    fn even_truncated_matches_full_even_block() {
        let eig = eig_at(-2.5e-4, 0.0);
        let zd = 3e-6;
        let full = cd_full(&eig, &control_derivative(&eig, zd)).unwrap();
        let top = eig.dim() - 2 + eig.dim() % 2;
        let trunc = cd_even_truncated(&eig, zd, &TransitionSet::up_to(top)).unwrap();
        // z̃² also couples odd pairs; compare only the even block
        let mut g_full = eig.to_eigenbasis(&full.generator);
        for n in 0..eig.dim() {
            for m in 0..eig.dim() {
                if n % 2 == 1 || m % 2 == 1 {
                    g_full[(n, m)] = 0.0;
                }
            }
        }
        let g_trunc = eig.to_eigenbasis(&trunc.generator);
        let scale = g_full.amax();
        assert!(scale > 0.0);
        assert!((&g_full - &g_trunc).amax() < 1e-9 * scale);
    }

    #[test]
    fn parity_selection_of_full_drive() {
        let eig = eig_at(1e-4, 0.0);
        let full = cd_full(&eig, &control_derivative(&eig, 1e-6)).unwrap();
        let g = eig.to_eigenbasis(&full.generator);
        let mut worst: f64 = 0.0;
        for n in 0..eig.dim() {
            for m in 0..eig.dim() {
                if (n + m) % 2 == 1 {
                    worst = worst.max(g[(n, m)].abs());
                }
            }
        }
        assert!(worst < 1e-10 * g.amax().max(1.0), "{worst}");
    }

    #[test]
    fn two_level_landau_zener() {
        // H0 = (Δ/2)σx + (ε/2)σz has the transitionless drive
        // ±Δε̇/(2(Δ² + ε²)) σy
        use crate::spectral::ScaledBasis;
        let (delta, eps, eps_dot) = (0.7, 0.3, 0.2);
        let h = DMatrix::from_row_slice(2, 2, &[eps / 2.0, delta / 2.0, delta / 2.0, -eps / 2.0]);
        let dh = DMatrix::from_row_slice(2, 2, &[eps_dot / 2.0, 0.0, 0.0, -eps_dot / 2.0]);
        let e: nalgebra::SymmetricEigen<f64, nalgebra::Dyn> = nalgebra::SymmetricEigen::new(h.clone());
        let mut idx = [0usize, 1];
        idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
        let eig = EigenSystem {
            energies: idx.iter().map(|&i| e.eigenvalues[i]).collect(),
            states: DMatrix::from_columns(&[e.eigenvectors.column(idx[0]), e.eigenvectors.column(idx[1])]),
            parities: vec![crate::spectral::Parity::Undefined; 2],
            zeta: 0.0,
            basis: ScaledBasis::with_omega0(2, 1.0).unwrap(),
        };
        let drv = cd_full(&eig, &dh).unwrap();
        // iG = c σy means G = c [[0, -1], [1, 0]]
        let c = delta * eps_dot / (2.0 * (delta * delta + eps * eps));
        assert_relative_eq!(drv.generator[(1, 0)].abs(), c, max_relative = 1e-12);
        assert_relative_eq!(drv.generator[(0, 1)], -drv.generator[(1, 0)]);
    }
}
