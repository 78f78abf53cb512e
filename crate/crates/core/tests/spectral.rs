use dwcat::spectral::{
    build_basis, eigenvalues, relative_error, BasisPolicy, EigenSystem, Parity, PotentialParams,
};
use dwcat::units::UnitSystem;

fn gamma() -> f64 {
    UnitSystem::default().gamma()
}

fn solve(zeta: f64, dim: usize) -> EigenSystem {
    let basis = build_basis(zeta, &BasisPolicy::default().with_dim(dim)).unwrap();
    EigenSystem::solve(&PotentialParams::new(zeta, gamma(), 0.0).unwrap(), &basis).unwrap()
}

#[test]
fn weak_quartic_shifts_match_perturbation_theory() {
    // H = p² + x²/4 + γx⁴ with x = b + b†: unit level spacing, so to second
    // order E_n = n + ½ + γ x⁴_nn − γ² Σ_k (x⁴_kn)² / (k − n)
    let g = 1e-7;
    let big = 60;
    let b = nalgebra::DMatrix::from_fn(big, big, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
    let x = &b + b.transpose();
    let x4 = &x * &x * &x * &x;
    let basis = build_basis(-1.0, &BasisPolicy::default().with_dim(40)).unwrap();
    let e = eigenvalues(&PotentialParams::new(-1.0, g, 0.0).unwrap(), &basis).unwrap();
    for n in 0..6 {
        let second: f64 = (0..big - 4)
            .filter(|&k| k != n)
            .map(|k| x4[(k, n)] * x4[(k, n)] / (k as f64 - n as f64))
            .sum();
        let oracle = n as f64 + 0.5 + g * x4[(n, n)] - g * g * second;
        assert!((e[n] - oracle).abs() < 1e-12, "level {n}: {} vs {oracle}", e[n]);
    }
}

#[test]
fn double_well_doublets_alternate_in_parity() {
    let eig = solve(3e-4, 50);
    for n in 0..8 {
        let expected = if n % 2 == 0 { Parity::Even } else { Parity::Odd };
        assert_eq!(eig.parities[n], expected, "level {n}");
    }
    // lowest doublet is nearly degenerate, the next doublet sits a well
    // quantum higher
    assert!(eig.gap(1, 0) < 1e-2 * eig.gap(2, 0));
}

#[test]
fn gap_closes_near_buckling_and_reopens_in_the_well() {
    let g20: Vec<f64> = [-1.0, -0.1, -1e-2, -1e-3, -2.5e-4]
        .iter()
        .map(|&z| solve(z, 50).gap(2, 0))
        .collect();
    assert!(g20.windows(2).all(|w| w[1] < w[0]), "{g20:?}");
    let g10: Vec<f64> = [-2.5e-4, 0.0, 1e-4, 3e-4]
        .iter()
        .map(|&z| solve(z, 50).gap(1, 0))
        .collect();
    assert!(g10.windows(2).all(|w| w[1] < w[0]), "{g10:?}");
}

#[test]
fn truncation_converges_at_both_protocol_ends() {
    for zeta in [-2.5e-4, 3e-4] {
        let low = solve(zeta, 50).energies;
        let high = solve(zeta, 200).energies;
        let eps = relative_error(&high, &low[..26]).unwrap();
        assert!(eps.iter().all(|e| *e < 1e-6), "zeta {zeta}: {eps:?}");
    }
}

#[test]
fn position_elements_obey_parity_selection() {
    let eig = solve(3e-4, 50);
    let z = eig.position_elements();
    for m in 0..12 {
        for n in 0..12 {
            if (m + n) % 2 == 0 {
                assert!(z[(m, n)].abs() < 1e-9, "({m}, {n})");
            }
        }
    }
    // the cat doublet is connected by roughly the well position; the shallow
    // barrier pulls the lobes slightly inward
    let x0 = (3e-4 / (8.0 * gamma())).sqrt();
    let z01 = z[(0, 1)].abs();
    assert!(z01 > 0.9 * x0 && z01 < x0, "{z01} vs {x0}");
}
