use std::f64::consts::PI;

use approx::assert_relative_eq;
use dwcat::analysis::{
    fidelity, fidelity_general, fidelity_to_level, populations, trace_distance, wigner,
    DEFAULT_P_RANGE, DEFAULT_RESOLUTION, DEFAULT_X_RANGE,
};
use dwcat::dynamics::{initial_thermal_state, DensityMatrix, ProtocolConfig};
use dwcat::spectral::ScaledBasis;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn fock(dim: usize, n: usize) -> DensityMatrix {
    let mut v = DVector::zeros(dim);
    v[n] = 1.0;
    DensityMatrix::pure_real(&v).unwrap()
}

/// Generalized Laguerre L_n^(k)(x) by the three-term recurrence.
fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 + k - x);
    if n == 0 {
        return l0;
    }
    for j in 1..n {
        let jf = j as f64;
        let l2 = ((2.0 * jf + 1.0 + k - x) * l1 - (jf + k) * l0) / (jf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

#[test]
fn fock_states_match_the_laguerre_closed_form() {
    // W_n(α) = (−1)ⁿ/π · e^{−2|α|²} L_n(4|α|²) with α = (x√r/2) + i p/√r
    let r = 0.7;
    let basis = ScaledBasis::with_omega0(12, r).unwrap();
    for n in [0, 1, 4, 9] {
        let g = wigner(&fock(12, n), &basis, (-5.0, 5.0), (-3.0, 3.0), (21, 13)).unwrap();
        for (i, &p) in g.p_axis.iter().enumerate() {
            for (j, &x) in g.x_axis.iter().enumerate() {
                let a2 = (x * r.sqrt() / 2.0).powi(2) + (p / r.sqrt()).powi(2);
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let oracle = sign / PI * (-2.0 * a2).exp() * laguerre(n, 0.0, 4.0 * a2);
                assert!((g.values[(i, j)] - oracle).abs() < 1e-12, "n={n} x={x} p={p}");
            }
        }
    }
}

#[test]
fn coherent_state_is_a_displaced_gaussian() {
    // |β⟩ with β = 1 + 0.5i in the r = 1 basis sits at x = 2 Re β, p = Im β
    let dim = 40;
    let beta = Complex64::new(1.0, 0.5);
    let mut psi = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    let mut c = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        psi[n] = c;
        c = c * beta / ((n + 1) as f64).sqrt();
    }
    let rho = DensityMatrix::pure(&psi).unwrap();
    let basis = ScaledBasis::with_omega0(dim, 1.0).unwrap();
    let g = wigner(&rho, &basis, (-4.0, 6.0), (-3.0, 3.0), (41, 31)).unwrap();
    for (i, &p) in g.p_axis.iter().enumerate() {
        for (j, &x) in g.x_axis.iter().enumerate() {
            let alpha = Complex64::new(x / 2.0, p);
            let oracle = (-2.0 * (alpha - beta).norm_sqr()).exp() / PI;
            assert!((g.values[(i, j)] - oracle).abs() < 1e-10, "x={x} p={p}");
        }
    }
}

/// Hermite functions φ_n(q) for the standard quadrature q.
fn hermite_functions(q: f64, count: usize) -> Vec<f64> {
    let mut out = vec![PI.powf(-0.25) * (-0.5 * q * q).exp()];
    if count > 1 {
        out.push(2f64.sqrt() * q * out[0]);
    }
    for n in 2..count {
        let nf = n as f64;
        let next = (2.0 / nf).sqrt() * q * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
        out.push(next);
    }
    out
}

#[test]
fn cat_state_marginal_and_parity() {
    let cfg = ProtocolConfig::default();
    let eig = cfg.eigensystem(cfg.zeta_f).unwrap();
    let psi = eig.state(0).into_owned();
    let rho = DensityMatrix::pure_real(&psi).unwrap();
    let n = DEFAULT_RESOLUTION;
    let g = wigner(&rho, &eig.basis, DEFAULT_X_RANGE, DEFAULT_P_RANGE, (n, n)).unwrap();
    assert!(!g.support_warning);
    assert!((g.integral() - 1.0).abs() < 0.01);

    // |ψ(x)|² in z_zpm units; the standard quadrature is x√(r/2)
    let r = eig.basis.omega0;
    let marginal = g.position_marginal();
    let peak = marginal.iter().copied().fold(0.0, f64::max);
    for (j, &x) in g.x_axis.iter().enumerate() {
        let q = x * (r / 2.0).sqrt();
        let amp: f64 = hermite_functions(q, psi.len()).iter().zip(psi.iter()).map(|(h, c)| h * c).sum();
        let density = amp * amp * (r / 2.0).sqrt();
        assert!((marginal[j] - density).abs() < 0.01 * peak, "x = {x}");
    }

    // lobes at ±√(ζ/8γ), negative fringes between them
    let x0 = (cfg.zeta_f / (8.0 * cfg.gamma())).sqrt();
    let jmax = (0..n).max_by(|&a, &b| marginal[a].total_cmp(&marginal[b])).unwrap();
    assert!((g.x_axis[jmax].abs() - x0).abs() < 3.0);
    assert!(g.min_value() < -0.1 / PI);

    let parity = rho.parity();
    assert!((g.value_at_origin().unwrap() * PI - parity).abs() < 1e-3);
}

#[test]
fn wigner_parity_of_a_thermal_mixture() {
    let cfg = ProtocolConfig::default();
    let eig = cfg.eigensystem(-1.0).unwrap();
    let rho = initial_thermal_state(&eig, 0.2).unwrap();
    let g = wigner(&rho, &eig.basis, (-8.0, 8.0), (-3.0, 3.0), (161, 121)).unwrap();
    assert!((g.value_at_origin().unwrap() * PI - rho.parity()).abs() < 1e-3);
    assert!((g.integral() - 1.0).abs() < 0.01);
}

fn random_state(dim: usize, seed: u64, rank: usize) -> DensityMatrix {
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let m = DMatrix::from_fn(dim, rank, |_, _| Complex64::new(next(), next()));
    let rho = &m * m.adjoint();
    let tr = rho.trace();
    DensityMatrix::new(rho / tr).unwrap()
}

#[test]
fn pure_shortcut_agrees_with_matrix_square_roots() {
    for seed in 0..5 {
        let mixed = random_state(4, seed, 4);
        let pure = random_state(4, seed + 100, 1);
        let shortcut = fidelity(&mixed, &pure).unwrap();
        let general = fidelity_general(&mixed, &pure).unwrap();
        assert!((shortcut - general).abs() < 1e-10, "{shortcut} vs {general}");
        let other = random_state(4, seed + 200, 4);
        let f = fidelity(&mixed, &other).unwrap();
        assert!((f - fidelity(&other, &mixed).unwrap()).abs() < 1e-10);
        assert!((0.0..=1.0 + 1e-10).contains(&f));
    }
}

#[test]
fn commuting_states_have_classical_fidelity() {
    // diagonal ρ, σ: F = Σ √(p_i q_i)
    let p: [f64; 3] = [0.5, 0.3, 0.2];
    let q: [f64; 3] = [0.1, 0.6, 0.3];
    let diag = |v: &[f64]| {
        DensityMatrix::new(DMatrix::from_diagonal(&DVector::from_iterator(
            3,
            v.iter().map(|x| Complex64::new(*x, 0.0)),
        )))
        .unwrap()
    };
    let oracle: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
    assert_relative_eq!(fidelity(&diag(&p), &diag(&q)).unwrap(), oracle, epsilon = 1e-12);
    let td: f64 = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert_relative_eq!(trace_distance(&diag(&p), &diag(&q)).unwrap(), td, epsilon = 1e-12);
}

#[test]
fn gibbs_populations_decay_geometrically() {
    let cfg = ProtocolConfig::default();
    let eig = cfg.eigensystem(-1.0).unwrap();
    for nbar in [5e-3, 0.2] {
        let rho = initial_thermal_state(&eig, nbar).unwrap();
        let pops = populations(&rho, &eig).unwrap();
        assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-7);
        assert!(pops.iter().all(|p| *p > -1e-8));
        // harmonic levels up to a tiny Duffing shift
        assert_relative_eq!(pops[0], 1.0 / (1.0 + nbar), max_relative = 1e-4);
        assert_relative_eq!(pops[1] / pops[0], nbar / (1.0 + nbar), max_relative = 1e-4);
        assert_relative_eq!(fidelity_to_level(&rho, &eig, 0).unwrap(), pops[0].sqrt(), max_relative = 1e-12);
    }
    let ground = initial_thermal_state(&eig, 0.0).unwrap();
    assert!((populations(&ground, &eig).unwrap()[0] - 1.0).abs() < 1e-12);
}
