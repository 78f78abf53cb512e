//! Double-well Hamiltonian in an adaptively scaled oscillator basis.
//!
//! The basis oscillator has frequency ω₀ = r·ω. In that basis
//!
//! ```text
//! H/ħω₀ = −(b−b†)²/4 − ζ(b+b†)²/(4r²) + γ(b+b†)⁴/r³ + (ξ/3)(b+b†)³/r^{5/2}
//! ```
//!
//! which is the familiar `sgn(ζ)/(4θ)`, `γ/(θ|ζ|)^{3/2}` form whenever
//! r² = θ|ζ|, and stays finite at ζ = 0 once r is pinned to √c₂.
//!
//! Operator polynomials are the exact projections of the infinite-dimensional
//! operators onto the first `dim` Fock states. Multiplying truncated ladder
//! matrices instead would lose kinetic energy on the highest basis state and
//! produce a spurious low-lying level.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extra Fock states kept while forming operator products before truncation.
/// Products up to fourth order only reach four states beyond the cut.
const PAD: usize = 4;

/// How the basis frequency follows the control parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisPolicy {
    /// θ used for ζ ≤ `zeta_switch`.
    pub c1: f64,
    /// Value of θ|ζ| (= r²) used for ζ > `zeta_switch`.
    pub c2: f64,
    pub zeta_switch: f64,
    pub dim: usize,
}

impl Default for BasisPolicy {
    fn default() -> Self {
        Self {
            c1: 2.0,
            c2: 5e-4,
            zeta_switch: -2.5e-4,
            dim: 50,
        }
    }
}

impl BasisPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid("c1", format!("must be positive, got {}", self.c1)));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::invalid("c2", format!("must be positive, got {}", self.c2)));
        }
        if !(self.zeta_switch < 0.0) {
            return Err(Error::invalid(
                "zeta_switch",
                format!("must be negative, got {}", self.zeta_switch),
            ));
        }
        if self.dim < 2 {
            return Err(Error::invalid("dim", format!("must be at least 2, got {}", self.dim)));
        }
        Ok(())
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Basis frequency ω₀/ω the policy assigns to `zeta`.
    pub fn omega0(&self, zeta: f64) -> f64 {
        if self.is_capped(zeta) {
            self.c2.sqrt()
        } else {
            (self.c1 * zeta.abs()).sqrt()
        }
    }

    pub fn is_capped(&self, zeta: f64) -> bool {
        zeta > self.zeta_switch
    }

    /// d ln r / dζ, the rate at which the basis dilates with ζ.
    pub fn log_omega0_derivative(&self, zeta: f64) -> f64 {
        if self.is_capped(zeta) {
            0.0
        } else {
            0.5 / zeta
        }
    }
}

/// Truncated oscillator basis with frequency `omega0` (in units of ω).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledBasis {
    pub dim: usize,
    /// θ; infinite for a capped basis built at ζ = 0.
    pub theta: f64,
    pub zeta_ref: f64,
    pub omega0: f64,
    /// True when r² = c₂ is pinned; such a basis is valid for every ζ.
    pub capped: bool,
}

impl ScaledBasis {
    /// A basis with an explicitly chosen frequency, valid for any ζ.
    pub fn with_omega0(dim: usize, omega0: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dim", format!("must be at least 2, got {dim}")));
        }
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::invalid("omega0", format!("must be positive, got {omega0}")));
        }
        Ok(Self {
            dim,
            theta: f64::INFINITY,
            zeta_ref: 0.0,
            omega0,
            capped: true,
        })
    }

    pub fn same_frame(&self, other: &ScaledBasis) -> bool {
        self.dim == other.dim && (self.omega0 - other.omega0).abs() <= 1e-14 * self.omega0
    }
}

pub fn build_basis(zeta: f64, policy: &BasisPolicy) -> Result<ScaledBasis> {
    policy.validate()?;
    if !(zeta >= -1.0) || !zeta.is_finite() {
        return Err(Error::invalid("zeta", format!("must be finite and >= -1, got {zeta}")));
    }
    let omega0 = policy.omega0(zeta);
    let capped = policy.is_capped(zeta);
    let theta = if capped {
        if zeta == 0.0 {
            f64::INFINITY
        } else {
            policy.c2 / zeta.abs()
        }
    } else {
        policy.c1
    };
    Ok(ScaledBasis {
        dim: policy.dim,
        theta,
        zeta_ref: zeta,
        omega0,
        capped,
    })
}

/// Control value ζ, Duffing strength γ and cubic asymmetry ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub zeta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub xi: f64,
}

impl PotentialParams {
    pub fn new(zeta: f64, gamma: f64, xi: f64) -> Result<Self> {
        let p = Self { zeta, gamma, xi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.zeta >= -1.0) || !self.zeta.is_finite() {
            return Err(Error::invalid("zeta", format!("must be >= -1, got {}", self.zeta)));
        }
        if !self.xi.is_finite() {
            return Err(Error::invalid("xi", "must be finite"));
        }
        Ok(())
    }

    pub fn at(&self, zeta: f64) -> Self {
        Self { zeta, ..*self }
    }
}

/// Annihilation and creation matrices, `b[(n-1, n)] = √n`.
pub fn ladder_operators(basis: &ScaledBasis) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = annihilation(basis.dim);
    let bd = b.transpose();
    (b, bd)
}

fn annihilation(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

/// Product of two banded matrices, only visiting the band.
fn band_mul(a: &DMatrix<f64>, bw_a: usize, b: &DMatrix<f64>, bw_b: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let bw = bw_a + bw_b;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let j_lo = i.saturating_sub(bw);
        let j_hi = (i + bw).min(n - 1);
        for j in j_lo..=j_hi {
            let k_lo = i.saturating_sub(bw_a).max(j.saturating_sub(bw_b));
            let k_hi = (i + bw_a).min(j + bw_b).min(n - 1);
            let mut s = 0.0;
            for k in k_lo..=k_hi {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// Dimensionless operator polynomials in a Fock basis of size `dim`.
///
/// `x = b + b†` and `p = b − b†` are the bare basis quadratures; the physical
/// position in z_zpm units is `x / √r`.
#[derive(Debug, Clone)]
pub struct Operators {
    pub dim: usize,
    pub x: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub x3: DMatrix<f64>,
    pub x4: DMatrix<f64>,
    /// (b − b†)², negative semidefinite.
    pub p2: DMatrix<f64>,
    /// Real antisymmetric G with D = iG = i(b†² − b²)/2, the generator of
    /// basis dilations.
    pub dilation: DMatrix<f64>,
}

impl Operators {
    pub fn new(dim: usize) -> Self {
        let n = dim + PAD;
        let b = annihilation(n);
        let bd = b.transpose();
        let x = &b + &bd;
        let p = &b - &bd;
        let x2 = band_mul(&x, 1, &x, 1);
        let x3 = band_mul(&x2, 2, &x, 1);
        let x4 = band_mul(&x2, 2, &x2, 2);
        let p2 = band_mul(&p, 1, &p, 1);
        let bd2 = band_mul(&bd, 1, &bd, 1);
        let dilation = (&bd2 - bd2.transpose()) * 0.5;
        let cut = |m: DMatrix<f64>| m.view((0, 0), (dim, dim)).into_owned();
        Self {
            dim,
            x: cut(x),
            x2: cut(x2),
            x3: cut(x3),
            x4: cut(x4),
            p2: cut(p2),
            dilation: cut(dilation),
        }
    }

    /// Hamiltonian in units of ħω₀ for a basis of frequency `omega0`.
    pub fn hamiltonian_basis_units(&self, params: &PotentialParams, omega0: f64) -> DMatrix<f64> {
        let r = omega0;
        let mut h = &self.p2 * -0.25;
        h += &self.x2 * (-params.zeta / (4.0 * r * r));
        h += &self.x4 * (params.gamma / (r * r * r));
        if params.xi != 0.0 {
            h += &self.x3 * (params.xi / (3.0 * r.powf(2.5)));
        }
        h
    }

    /// Hamiltonian in units of ħω.
    pub fn hamiltonian(&self, params: &PotentialParams, omega0: f64) -> DMatrix<f64> {
        self.hamiltonian_basis_units(params, omega0) * omega0
    }

    /// Position z/z_zpm.
    pub fn position(&self, omega0: f64) -> DMatrix<f64> {
        &self.x / omega0.sqrt()
    }

    /// (z/z_zpm)².
    pub fn position_squared(&self, omega0: f64) -> DMatrix<f64> {
        &self.x2 / omega0
    }

    /// Parity Π = diag((−1)ⁿ).
    pub fn parity(&self) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })
    }
}

/// Hamiltonian in units of ħω₀ of `basis`.
pub fn build_hamiltonian(params: &PotentialParams, basis: &ScaledBasis) -> Result<DMatrix<f64>> {
    params.validate()?;
    check_basis(params, basis)?;
    Ok(Operators::new(basis.dim).hamiltonian_basis_units(params, basis.omega0))
}

fn check_basis(params: &PotentialParams, basis: &ScaledBasis) -> Result<()> {
    if basis.capped {
        return Ok(());
    }
    let tol = 1e-12 * params.zeta.abs().max(basis.zeta_ref.abs());
    if (basis.zeta_ref - params.zeta).abs() > tol {
        return Err(Error::BasisMismatch {
            basis_zeta: basis.zeta_ref,
            zeta: params.zeta,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Undefined,
}

impl Parity {
    fn from_expectation(p: f64) -> Self {
        if p > 0.99 {
            Parity::Even
        } else if p < -0.99 {
            Parity::Odd
        } else {
            Parity::Undefined
        }
    }
}

/// Instantaneous eigenvalues and eigenvectors of the double-well Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending energies in units of ħω.
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, in `basis`.
    pub states: DMatrix<f64>,
    pub parities: Vec<Parity>,
    pub zeta: f64,
    pub basis: ScaledBasis,
}

impl EigenSystem {
    pub fn solve(params: &PotentialParams, basis: &ScaledBasis) -> Result<Self> {
        let h = build_hamiltonian(params, basis)?;
        eigensystem(&h, params, basis)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// δ_mn = E_m − E_n in units of ω.
    pub fn gap(&self, m: usize, n: usize) -> f64 {
        self.energies[m] - self.energies[n]
    }

    pub fn state(&self, n: usize) -> DVectorView<'_, f64> {
        self.states.column(n)
    }

    pub fn ground_state(&self) -> DVectorView<'_, f64> {
        self.state(0)
    }

    /// Vᵀ·op·V for an operator given in the computational basis.
    pub fn to_eigenbasis(&self, op: &DMatrix<f64>) -> DMatrix<f64> {
        self.states.transpose() * op * &self.states
    }

    /// V·op·Vᵀ for an operator given in the eigenbasis.
    pub fn from_eigenbasis(&self, op: &DMatrix<f64>) -> DMatrix<f64> {
        &self.states * op * self.states.transpose()
    }

    /// ⟨m|z/z_zpm|n⟩ for all pairs.
    pub fn position_elements(&self) -> DMatrix<f64> {
        let ops = Operators::new(self.basis.dim);
        self.to_eigenbasis(&ops.position(self.basis.omega0))
    }

    /// Flip eigenvector signs so each column overlaps positively with the
    /// same column of `previous`. Both systems must share a basis frame.
    pub fn align_signs_to(&mut self, previous: &EigenSystem) {
        for n in 0..self.dim().min(previous.dim()) {
            if self.states.column(n).dot(&previous.states.column(n)) < 0.0 {
                self.states.column_mut(n).neg_mut();
            }
        }
    }
}

/// Full diagonalisation of `h` (units ħω₀ of `basis`).
pub fn eigensystem(
    h: &DMatrix<f64>,
    params: &PotentialParams,
    basis: &ScaledBasis,
) -> Result<EigenSystem> {
    let dim = basis.dim;
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: h.nrows(),
        });
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation: asym });
    }
    let eig = nalgebra::SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
        .ok_or(Error::Diagonalization { dim })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let parity = Operators::new(dim).parity();
    let mut energies = Vec::with_capacity(dim);
    let mut states = DMatrix::zeros(dim, dim);
    let mut parities = Vec::with_capacity(dim);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let lead = v.iamax();
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        let p: f64 = v.iter().zip(parity.iter()).map(|(c, s)| c * c * s).sum();
        energies.push(eig.eigenvalues[k] * basis.omega0);
        parities.push(Parity::from_expectation(p));
        states.set_column(col, &v);
    }

    // Near-degenerate doublets: even member first.
    for n in 0..dim.saturating_sub(1) {
        let tol = 1e-12 * energies[n].abs().max(1.0);
        if (energies[n + 1] - energies[n]).abs() < tol
            && parities[n] == Parity::Odd
            && parities[n + 1] == Parity::Even
        {
            energies.swap(n, n + 1);
            parities.swap(n, n + 1);
            states.swap_columns(n, n + 1);
        }
    }

    Ok(EigenSystem {
        energies,
        states,
        parities,
        zeta: params.zeta,
        basis: *basis,
    })
}

/// Eigenvalues only (units ħω), for calibration at large truncations.
pub fn eigenvalues(params: &PotentialParams, basis: &ScaledBasis) -> Result<Vec<f64>> {
    let h = build_hamiltonian(params, basis)?;
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().map(|v| v * basis.omega0).collect();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diagonalization { dim: basis.dim });
    }
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// ε_n = |Eᴴ_n − Eᴸ_n| / |Eᴴ_n + Eᴸ_n| for every level of `low`.
pub fn relative_error(high: &[f64], low: &[f64]) -> Result<Vec<f64>> {
    if high.len() < low.len() {
        return Err(Error::invalid(
            "high",
            format!(
                "reference spectrum has {} levels, fewer than the {} compared",
                high.len(),
                low.len()
            ),
        ));
    }
    low.iter()
        .zip(high)
        .enumerate()
        .map(|(n, (&l, &h))| {
            let denom = (h + l).abs();
            if denom == 0.0 {
                Err(Error::IncomparableLevel { level: n })
            } else {
                Ok((h - l).abs() / denom)
            }
        })
        .collect()
}

/// δ_mn = (E_m − E_n)/ħ in units of ω.
pub fn gap(eig: &EigenSystem, m: usize, n: usize) -> f64 {
    eig.gap(m, n)
}
