use approx::assert_relative_eq;
use dwcat::device::{
    alpha2_for_zeta, alpha3_root, control_mapping, duffing_gamma, electrostatic_coeffs,
    electrostatic_coeffs_fd, elastic_params, ElectrodeGeometry, MembraneGeometry,
};
use dwcat::units::{UnitSystem, REFERENCE_OMEGA};
use num_complex::Complex64;

fn rods(a: f64, b: f64) -> ElectrodeGeometry {
    ElectrodeGeometry {
        half_length: a,
        half_separation: b,
        standoff: 1.0,
        potential: 1.0,
    }
}

#[test]
fn series_and_finite_differences_agree_on_a_grid() {
    for i in 0..10 {
        for k in 0..10 {
            let a = 2.0 + 3.0 * i as f64;
            let b = 0.2 + 0.3 * k as f64;
            let exact = electrostatic_coeffs(&rods(a, b), 4).unwrap().normalized;
            let fd = electrostatic_coeffs_fd(&rods(a, b), 4).unwrap();
            let scale = exact.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for j in 0..4 {
                assert!(
                    (exact[j] - fd[j]).abs() < 1e-8 * scale,
                    "a={a} b={b} j={}: {} vs {}",
                    j + 1,
                    exact[j],
                    fd[j]
                );
            }
        }
    }
}

#[test]
fn long_rods_reduce_to_the_line_charge_logarithm() {
    // for a → ∞, V/V₀ = const − 2 ln(b² + (z − 1)²) = const − 4 Re ln(c + z)
    // with c = −1 + ib, whose Taylor coefficients are (−1)^{j+1}/(j c^j)
    for b in [0.3, 1.0 / 3f64.sqrt(), 1.5] {
        let got = electrostatic_coeffs(&rods(1e6, b), 6).unwrap().normalized;
        let c = Complex64::new(-1.0, b);
        for j in 1..=6 {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let oracle = -4.0 * (sign / (j as f64 * c.powi(j as i32))).re;
            assert!((got[j - 1] - oracle).abs() < 1e-9 * oracle.abs().max(1.0), "b={b} j={j}");
        }
    }
}

#[test]
fn alpha3_crosses_zero_once_and_the_root_brackets() {
    for a in [3.0, 10.0, 100.0] {
        let alpha3 = |b: f64| electrostatic_coeffs(&rods(a, b), 3).unwrap().normalized[2];
        let signs: Vec<bool> = (1..200).map(|i| alpha3(0.01 * i as f64) > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1, "a = {a}");
        let root = alpha3_root(&rods(a, 1.0), (0.1, 1.5)).unwrap();
        assert!(alpha3(root - 1e-6) * alpha3(root + 1e-6) < 0.0);
    }
    // the long-rod root approaches z₀/√3 from above
    let near = alpha3_root(&rods(10.0, 1.0), (0.1, 1.5)).unwrap();
    assert_relative_eq!(near, 0.577425, max_relative = 1e-5);
    let far = alpha3_root(&rods(1e4, 1.0), (0.1, 1.5)).unwrap();
    assert_relative_eq!(far, 1.0 / 3f64.sqrt(), max_relative = 1e-8);
}

#[test]
fn wide_electrodes_make_the_quadratic_term_dominate() {
    let c = electrostatic_coeffs(&rods(10.0, 20.0), 4).unwrap().normalized;
    assert!(c[3].abs() < 1e-2 * c[1].abs(), "{c:?}");
}

#[test]
fn absolute_coefficients_scale_with_standoff_and_voltage() {
    let g = ElectrodeGeometry {
        half_length: 10e-6,
        half_separation: 0.8e-6,
        standoff: 1e-6,
        potential: 3.0,
    };
    let c = electrostatic_coeffs(&g, 4).unwrap();
    for j in 0..4 {
        assert_relative_eq!(c.alpha[j], c.normalized[j] * 3.0 / 1e-6f64.powi(j as i32 + 1), max_relative = 1e-14);
    }
}

#[test]
fn reference_device_parameters() {
    let e = elastic_params(&MembraneGeometry::default(), 1, Some(REFERENCE_OMEGA)).unwrap();
    let g = duffing_gamma(e.mass, e.omega, e.beta);
    assert_relative_eq!(g, 3.1e-8, max_relative = 0.01);
    assert_relative_eq!(UnitSystem::default().gamma(), g, max_relative = 1e-14);
    let u = UnitSystem::default();
    for zeta in [-1.0, -2.5e-4, 0.0, 3e-4] {
        let back = control_mapping(alpha2_for_zeta(zeta, &u), &u);
        assert!((back - zeta).abs() < 1e-12);
    }
}
