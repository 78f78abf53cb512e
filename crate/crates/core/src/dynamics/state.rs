use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::EigenSystem;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const NEGATIVITY_TOL: f64 = 1e-6;

/// A density matrix in the computational (Fock) basis of some scaled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and (approximate) positivity.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let rho = Self { matrix };
        let herm = rho.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvariantViolation {
                invariant: "unit trace",
                time: f64::NAN,
                value: tr - 1.0,
            });
        }
        let min = rho.min_eigenvalue();
        if min < -NEGATIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(rho)
    }

    pub(crate) fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Self {
        Self {
            matrix: DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
                Complex64::new(re[(i, j)], im[(i, j)])
            }),
        }
    }

    pub(crate) fn parts(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.matrix.map(|c| c.re), self.matrix.map(|c| c.im))
    }

    /// |ψ⟩⟨ψ| for a normalized state.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("psi", "zero vector"));
        }
        let psi = psi / Complex64::new(norm, 0.0);
        Ok(Self {
            matrix: &psi * psi.adjoint(),
        })
    }

    pub fn pure_real(psi: &DVector<f64>) -> Result<Self> {
        Self::pure(&psi.map(|v| Complex64::new(v, 0.0)))
    }

    /// Diagonal in the eigenbasis of `eig` with the given populations.
    pub fn from_populations(eig: &EigenSystem, populations: &[f64]) -> Result<Self> {
        if populations.len() > eig.dim() {
            return Err(Error::DimensionMismatch {
                expected: eig.dim(),
                found: populations.len(),
            });
        }
        let mut diag = DMatrix::zeros(eig.dim(), eig.dim());
        for (n, p) in populations.iter().enumerate() {
            diag[(n, n)] = *p;
        }
        let re = eig.from_eigenbasis(&diag);
        Self::new(re.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let adj = self.matrix.adjoint();
        (&self.matrix - adj).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// tr ρ².
    pub fn purity(&self) -> f64 {
        // Σ|ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    /// ⟨ψ|ρ|ψ⟩ for a real vector.
    pub fn expectation_real(&self, psi: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for j in 0..self.dim() {
            let mut col = 0.0;
            for i in 0..self.dim() {
                col += psi[i] * self.matrix[(i, j)].re;
            }
            s += col * psi[j];
        }
        s
    }

    /// ⟨Π⟩ with Π = diag((−1)ⁿ) in the Fock basis.
    pub fn parity(&self) -> f64 {
        self.matrix
            .diagonal()
            .iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 0 { c.re } else { -c.re })
            .sum()
    }
}
