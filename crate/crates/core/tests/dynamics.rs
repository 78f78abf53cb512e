use dwcat::analysis::populations;
use dwcat::dynamics::{
    initial_thermal_state, jump_operator, rhs, thermal_occupation, BathParams, DensityMatrix,
};
use dwcat::spectral::{build_basis, BasisPolicy, EigenSystem, Parity, PotentialParams};
use dwcat::units::UnitSystem;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn solve(zeta: f64, gamma: f64, dim: usize) -> EigenSystem {
    let basis = build_basis(zeta, &BasisPolicy::default().with_dim(dim)).unwrap();
    EigenSystem::solve(&PotentialParams::new(zeta, gamma, 0.0).unwrap(), &basis).unwrap()
}

fn in_eigenbasis(eig: &EigenSystem, bath: &BathParams) -> DMatrix<f64> {
    eig.to_eigenbasis(&jump_operator(eig, bath).unwrap())
}

#[test]
fn zero_temperature_jumps_only_lower_the_energy() {
    let eig = solve(-1.0, UnitSystem::default().gamma(), 30);
    let bath = BathParams::new(0.0, 100.0).unwrap();
    let a = in_eigenbasis(&eig, &bath);
    let scale = a.amax();
    assert!(scale > 0.0);
    for m in 0..30 {
        for n in 0..m {
            // a[(m, n)] with m > n raises the energy
            assert!(a[(m, n)].abs() < 1e-12 * scale, "upward entry ({m},{n}) = {}", a[(m, n)]);
        }
    }
}

#[test]
fn harmonic_trap_couples_neighbouring_levels() {
    // x̃ = b + b† with unit spacing: the lowering entry between n+1 and n is
    // √(n+1)/Q at zero temperature
    let q = 50.0;
    let eig = solve(-1.0, 1e-12, 80);
    let a = in_eigenbasis(&eig, &BathParams::new(0.0, q).unwrap());
    for n in 0..20 {
        let oracle = ((n + 1) as f64).sqrt() / q;
        assert!((a[(n, n + 1)].abs() - oracle).abs() < 1e-9, "n = {n}");
        for m in n + 2..30 {
            assert!(a[(n, m)].abs() < 1e-9, "({n},{m}) = {}", a[(n, m)]);
        }
    }
}

#[test]
fn double_well_jumps_flip_parity() {
    let eig = solve(3e-4, UnitSystem::default().gamma(), 50);
    let a = in_eigenbasis(&eig, &BathParams::new(30e-3, 1e4).unwrap());
    let scale = a.amax();
    for m in 0..12 {
        for n in 0..12 {
            if eig.parities[m] == eig.parities[n] {
                assert!(a[(m, n)].abs() < 1e-10 * scale, "({m},{n})");
            }
        }
    }
    assert!(eig.parities[..12].iter().all(|p| *p != Parity::Undefined));
}

#[test]
fn occupations_satisfy_detailed_balance() {
    let bath = BathParams::new(20e-3, 1e5).unwrap();
    let th = bath.unit.quantum_temperature();
    for delta in [0.01, 0.3, 1.0, 4.0] {
        let n = thermal_occupation(delta, &bath).unwrap();
        let ratio = n / (n + 1.0);
        assert!((ratio - (-delta * th / bath.temperature).exp()).abs() < 1e-14 * ratio.max(1.0));
    }
    assert!(thermal_occupation(0.0, &bath).is_err());
}

#[test]
fn master_equation_preserves_trace() {
    let dim = 8;
    let herm = |seed: f64| {
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new((seed * (i + 2 * j + 1) as f64).sin(), (seed * (3 * i + j) as f64).cos())
        });
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    };
    let psi = DVector::from_fn(dim, |i, _| Complex64::new(1.0 / (i + 1) as f64, 0.1 * i as f64));
    let rho = DensityMatrix::pure(&psi).unwrap();
    let a = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(((i * j) as f64).cos(), 0.0));
    let d = rhs(&rho, &herm(0.7), &a, &herm(1.3)).unwrap();
    assert!(d.trace().norm() < 1e-12);
    let herm_err = (&d - d.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(herm_err < 1e-12);
}

#[test]
fn thermal_start_has_geometric_ground_population() {
    let eig = solve(-1.0, UnitSystem::default().gamma(), 50);
    for (nbar, p0) in [(0.005_025_125_628, 0.995), (0.2, 1.0 / 1.2)] {
        let rho = initial_thermal_state(&eig, nbar).unwrap();
        let pops = populations(&rho, &eig).unwrap();
        assert!((pops[0] - p0).abs() < 1e-6, "N̄ = {nbar}: {}", pops[0]);
        assert!((pops[1] / pops[0] - nbar / (1.0 + nbar)).abs() < 1e-5);
    }
    assert!(initial_thermal_state(&eig, -0.1).is_err());
}
