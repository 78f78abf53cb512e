//! Fidelities, Wigner functions, populations and purity.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::spectral::{EigenSystem, Operators, ScaledBasis};

/// Eigenvalues above −this are clipped to zero before taking square roots.
pub const CLIP: f64 = 1e-8;
const PURE_THRESHOLD: f64 = 1e-9;

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Principal eigenvector of a density matrix.
fn dominant_vector(rho: &DensityMatrix) -> DVector<Complex64> {
    let e = nalgebra::SymmetricEigen::new(rho.matrix().clone());
    e.eigenvectors.column(e.eigenvalues.imax()).into_owned()
}

/// Uhlmann fidelity F = tr √(√ρ σ √ρ).
///
/// Uses √⟨ψ|ρ|ψ⟩ when either argument is pure.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    if (sigma.purity() - 1.0).abs() < PURE_THRESHOLD {
        return Ok(fidelity_to_pure(rho, &dominant_vector(sigma)));
    }
    if (rho.purity() - 1.0).abs() < PURE_THRESHOLD {
        return Ok(fidelity_to_pure(sigma, &dominant_vector(rho)));
    }
    fidelity_general(rho, sigma)
}

/// Full matrix-square-root evaluation, regardless of purity.
///
/// F is summed as the singular values of √ρ√σ, which equal the square roots
/// of the eigenvalues of √ρσ√ρ but do not turn roundoff into √ε errors.
pub fn fidelity_general(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let product = hermitian_sqrt(rho.matrix())? * hermitian_sqrt(sigma.matrix())?;
    let sv = product.singular_values();
    Ok(sv.sum().min(1.0 + 1e-12))
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let e = nalgebra::SymmetricEigen::new(herm);
    if e.eigenvalues.min() < -CLIP {
        return Err(Error::NotPositive {
            min_eigenvalue: e.eigenvalues.min(),
        });
    }
    // eigenvalues at roundoff level are zero; their roots would be ~1e-8
    let noise = m.nrows() as f64 * f64::EPSILON * e.eigenvalues.amax();
    let roots = e
        .eigenvalues
        .map(|l| Complex64::new(if l > noise { l.sqrt() } else { 0.0 }, 0.0));
    let v = &e.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.adjoint())
}

/// √⟨ψ|ρ|ψ⟩ for a (normalized) pure target.
pub fn fidelity_to_pure(rho: &DensityMatrix, psi: &DVector<Complex64>) -> f64 {
    let v = rho.matrix() * psi;
    let overlap = psi.dotc(&v).re / psi.norm_squared();
    overlap.max(0.0).sqrt()
}

/// Fidelity to the n-th eigenstate of `eig`.
pub fn fidelity_to_level(rho: &DensityMatrix, eig: &EigenSystem, n: usize) -> Result<f64> {
    check_dims(eig.dim(), rho.dim())?;
    Ok(rho.expectation_real(&eig.state(n).into_owned()).max(0.0).sqrt())
}

/// ρ_nn in the eigenbasis of `eig`.
pub fn populations(rho: &DensityMatrix, eig: &EigenSystem) -> Result<Vec<f64>> {
    check_dims(eig.dim(), rho.dim())?;
    let re = rho.matrix().map(|c| c.re);
    let rotated = eig.states.transpose() * re * &eig.states;
    Ok(rotated.diagonal().iter().copied().collect())
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// ½‖ρ − σ‖₁.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let d = rho.matrix() - sigma.matrix();
    let herm = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(0.5 * herm.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}

/// W(x, p) sampled on a rectangular grid.
///
/// x is the position in zero-point units and p the conjugate momentum
/// p·z_zpm/ħ, so [x, p] = i and ∫W dx dp = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[(i, j)]` is W(x_axis[j], p_axis[i]).
    pub values: DMatrix<f64>,
    /// Set when the state's spread reaches beyond the grid.
    pub support_warning: bool,
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Default position range, wide enough for lobes at ±35.
pub const DEFAULT_X_RANGE: (f64, f64) = (-60.0, 60.0);
/// Default momentum range. Double-well lobes are narrow in p (rms ≈ 0.1)
/// and their fringes have period π/35, so p needs a much tighter window
/// than x.
pub const DEFAULT_P_RANGE: (f64, f64) = (-1.5, 1.5);
pub const DEFAULT_RESOLUTION: usize = 241;
/// Allowed |∫W − tr ρ| before a grid is flagged.
pub const SUPPORT_TOLERANCE: f64 = 0.01;

/// Wigner function of `rho`, given in the Fock basis of `basis`.
pub fn wigner(
    rho: &DensityMatrix,
    basis: &ScaledBasis,
    x_range: (f64, f64),
    p_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<WignerGrid> {
    check_dims(basis.dim, rho.dim())?;
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::invalid("resolution", "need at least 2 points per axis"));
    }
    if !(x_range.1 > x_range.0 && p_range.1 > p_range.0) {
        return Err(Error::invalid("range", "axis ranges must be increasing"));
    }
    let r = basis.omega0;
    let x_axis = linspace(x_range.0, x_range.1, resolution.0);
    let p_axis = linspace(p_range.0, p_range.1, resolution.1);
    let m = rho.matrix();

    // standard quadratures of the basis oscillator are x√(r/2) and p√(2/r);
    // α is their complex combination over √2
    let xs_scale = r.sqrt() / 2.0;
    let ps_scale = 1.0 / r.sqrt();
    let rows: Vec<Vec<f64>> = p_axis
        .par_iter()
        .map(|&p| {
            x_axis
                .iter()
                .map(|&x| wigner_point(m, Complex64::new(x * xs_scale, p * ps_scale)))
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(p_axis.len(), x_axis.len(), |i, j| rows[i][j]);

    // The rms radius must fit inside the grid, and the grid must hold the
    // unit mass. The second test also catches under-resolved fringes.
    let ops = Operators::new(basis.dim);
    let trace_with = |op: &DMatrix<f64>| -> f64 {
        (0..basis.dim)
            .flat_map(|i| (0..basis.dim).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].re * op[(j, i)])
            .sum()
    };
    let sx = (trace_with(&ops.x2) / r).max(0.0).sqrt();
    let sp = (-trace_with(&ops.p2) * r / 4.0).max(0.0).sqrt();
    let fits = |s: f64, lo: f64, hi: f64| s <= hi.min(-lo);
    let mut grid = WignerGrid {
        x_axis,
        p_axis,
        values,
        support_warning: false,
    };
    grid.support_warning = !(fits(sx, x_range.0, x_range.1) && fits(sp, p_range.0, p_range.1))
        || (grid.integral() - trace_of(m)).abs() > SUPPORT_TOLERANCE;
    Ok(grid)
}

fn trace_of(m: &DMatrix<Complex64>) -> f64 {
    m.diagonal().iter().map(|c| c.re).sum()
}

/// Σ ρ_mn W_|m⟩⟨n|(α) by the normalized Laguerre recurrence, α = (x + ip)/√2
/// in standard quadratures.
fn wigner_point(rho: &DMatrix<Complex64>, alpha: Complex64) -> f64 {
    let dim = rho.nrows();
    let a2 = alpha * 2.0;
    let mut w_list = vec![Complex64::new(0.0, 0.0); dim];
    w_list[0] = Complex64::new((-2.0 * alpha.norm_sqr()).exp() / std::f64::consts::PI, 0.0);
    let mut w = rho[(0, 0)].re * w_list[0].re;
    for n in 1..dim {
        w_list[n] = a2 * w_list[n - 1] / (n as f64).sqrt();
        w += 2.0 * (rho[(0, n)] * w_list[n]).re;
    }
    for m in 1..dim {
        let sm = (m as f64).sqrt();
        let mut temp = w_list[m];
        w_list[m] = (a2.conj() * temp - w_list[m - 1] * sm) / sm;
        w += (rho[(m, m)] * w_list[m]).re;
        for n in m + 1..dim {
            let next = (a2 * w_list[n - 1] - temp * sm) / (n as f64).sqrt();
            temp = w_list[n];
            w_list[n] = next;
            w += 2.0 * (rho[(m, n)] * w_list[n]).re;
        }
    }
    w
}

impl WignerGrid {
    /// Trapezoidal ∫∫W dx dp.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(&self.x_axis);
        let wp = trapezoid_weights(&self.p_axis);
        let mut s = 0.0;
        for (i, a) in wp.iter().enumerate() {
            for (j, b) in wx.iter().enumerate() {
                s += a * b * self.values[(i, j)];
            }
        }
        s
    }

    /// ∫W dp at each x.
    pub fn position_marginal(&self) -> Vec<f64> {
        let wp = trapezoid_weights(&self.p_axis);
        (0..self.x_axis.len())
            .map(|j| wp.iter().enumerate().map(|(i, w)| w * self.values[(i, j)]).sum())
            .collect()
    }

    pub fn value_at_origin(&self) -> Option<f64> {
        let j = self.x_axis.iter().position(|x| *x == 0.0)?;
        let i = self.p_axis.iter().position(|p| *p == 0.0)?;
        Some(self.values[(i, j)])
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }

    /// `x,p,W` rows, x fastest.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p,w\n");
        for (i, p) in self.p_axis.iter().enumerate() {
            for (j, x) in self.x_axis.iter().enumerate() {
                let _ = writeln!(out, "{:.17e},{:.17e},{:.17e}", x, p, self.values[(i, j)]);
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize| Error::invalid("wigner csv", format!("malformed line {line}"));
        let mut triples = Vec::new();
        for (k, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(k + 1))?;
            if v.len() != 3 {
                return Err(bad(k + 1));
            }
            triples.push((v[0], v[1], v[2]));
        }
        let nx = triples.iter().take_while(|t| t.1 == triples[0].1).count();
        if nx == 0 || triples.len() % nx != 0 {
            return Err(Error::invalid("wigner csv", "not a rectangular grid"));
        }
        let np = triples.len() / nx;
        let x_axis = triples[..nx].iter().map(|t| t.0).collect();
        let p_axis = (0..np).map(|i| triples[i * nx].1).collect();
        let values = DMatrix::from_fn(np, nx, |i, j| triples[i * nx + j].2);
        Ok(Self {
            x_axis,
            p_axis,
            values,
            support_warning: false,
        })
    }

    /// Binary layout (little endian): magic `DWWG`, u32 version 1, u64 nx,
    /// u64 np, f64 x_min, x_max, p_min, p_max, then np·nx f64 values
    /// row-major with x fastest. Axes are evenly spaced.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + 8 * self.values.len());
        out.extend_from_slice(b"DWWG");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.x_axis.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.p_axis.len() as u64).to_le_bytes());
        for v in [
            self.x_axis[0],
            *self.x_axis.last().unwrap_or(&0.0),
            self.p_axis[0],
            *self.p_axis.last().unwrap_or(&0.0),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..self.p_axis.len() {
            for j in 0..self.x_axis.len() {
                out.extend_from_slice(&self.values[(i, j)].to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::invalid("wigner binary", "truncated or malformed data");
        if bytes.len() < 56 || &bytes[..4] != b"DWWG" {
            return Err(bad());
        }
        let u64_at = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
        let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
        let (nx, np) = (u64_at(8), u64_at(16));
        if bytes.len() != 56 + 8 * nx * np {
            return Err(bad());
        }
        let x_axis = linspace(f64_at(24), f64_at(32), nx);
        let p_axis = linspace(f64_at(40), f64_at(48), np);
        let values = DMatrix::from_fn(np, nx, |i, j| f64_at(56 + 8 * (i * nx + j)));
        Ok(Self {
            x_axis,
            p_axis,
            values,
            support_warning: false,
        })
    }
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}
