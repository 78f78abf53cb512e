//! Physical device: graphene membrane elasticity and the two-rod
//! electrostatic potential that softens the trap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{UnitSystem, HBAR, REFERENCE_OMEGA};

/// Rectangular membrane pinned along two edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembraneGeometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub mass_density: f64,
    pub young_modulus: f64,
    /// Line tension 𝒯 at the clamped edges, N/m.
    pub tension: f64,
}

impl Default for MembraneGeometry {
    /// Monolayer graphene, 5 µm × 1 µm. The tension is chosen so the
    /// fundamental mode sits at 2 MHz.
    fn default() -> Self {
        let length = 5e-6;
        let thickness = 3.35e-10;
        let mass_density = 2.26e3;
        let mu = mass_density * thickness;
        let v = REFERENCE_OMEGA * length / std::f64::consts::PI;
        Self {
            length,
            width: 1e-6,
            thickness,
            mass_density,
            young_modulus: 1.02e12,
            tension: mu * v * v,
        }
    }
}

impl MembraneGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("width", self.width),
            ("thickness", self.thickness),
            ("mass_density", self.mass_density),
            ("young_modulus", self.young_modulus),
            ("tension", self.tension),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Areal mass density μ = ϱh.
    pub fn areal_density(&self) -> f64 {
        self.mass_density * self.thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub mass: f64,
    pub beta: f64,
    pub omega: f64,
}

/// Effective mass, Duffing coefficient and frequency of mode `n`.
///
/// `omega` overrides the tension formula when given.
pub fn elastic_params(
    geom: &MembraneGeometry,
    n: u32,
    omega: Option<f64>,
) -> Result<ElasticParams> {
    geom.validate()?;
    if n < 1 {
        return Err(Error::invalid("mode", "mode index starts at 1"));
    }
    let mu = geom.areal_density();
    let npi = n as f64 * std::f64::consts::PI;
    let mass = 0.5 * mu * geom.length * geom.width;
    let beta = geom.young_modulus * geom.thickness * geom.width / (8.0 * geom.length.powi(3))
        * npi.powi(4);
    let omega = match omega {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => return Err(Error::invalid("omega", format!("must be positive, got {w}"))),
        None => (geom.tension / mu).sqrt() * npi / geom.length,
    };
    Ok(ElasticParams { mass, beta, omega })
}

/// γ = βħ/(16 m² ω³).
pub fn duffing_gamma(mass: f64, omega: f64, beta: f64) -> f64 {
    beta * HBAR / (16.0 * mass * mass * omega.powi(3))
}

/// Two thin rods of length 2a at x = ±b, a distance z₀ below the membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeGeometry {
    pub half_length: f64,
    pub half_separation: f64,
    pub standoff: f64,
    /// V₀, volts.
    pub potential: f64,
}

impl ElectrodeGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("half_length", self.half_length),
            ("half_separation", self.half_separation),
            ("standoff", self.standoff),
            ("potential", self.potential),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// V_e(x = 0, z) / V₀.
    ///
    /// Written as ln((s+a)²/(b²+u²)), which equals ln((s+a)/(s−a)) but does
    /// not cancel when a ≫ √(b²+u²).
    pub fn potential_per_volt(&self, z: f64) -> f64 {
        let a = self.half_length;
        let b = self.half_separation;
        let u = z - self.standoff;
        let q = b * b + u * u;
        let s = (a * a + q).sqrt();
        2.0 * (2.0 * (s + a).ln() - q.ln())
    }

    /// V_e(0, z)/V₀ − V_e(0, 0)/V₀, accurate to roundoff relative to the
    /// increment itself rather than to V_e.
    fn increment_per_volt(&self, z: f64) -> f64 {
        let a = self.half_length;
        let b = self.half_separation;
        let z0 = self.standoff;
        let q0 = b * b + z0 * z0;
        // q − q₀ = (z − z₀)² − z₀²
        let dq = z * (z - 2.0 * z0);
        let s0 = (a * a + q0).sqrt();
        let s = (a * a + q0 + dq).sqrt();
        let ds = dq / (s + s0);
        2.0 * (2.0 * (ds / (s0 + a)).ln_1p() - (dq / q0).ln_1p())
    }
}

/// Truncated Taylor series in a single variable.
#[derive(Debug, Clone, Copy)]
struct Series<const N: usize>([f64; N]);

impl<const N: usize> Series<N> {
    fn constant(c: f64) -> Self {
        let mut s = [0.0; N];
        s[0] = c;
        Self(s)
    }

    fn add(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }

    fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|v| v * c))
    }

    fn mul(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()))
    }

    fn sqrt(&self) -> Self {
        let mut h = [0.0; N];
        h[0] = self.0[0].sqrt();
        for k in 1..N {
            let cross: f64 = (1..k).map(|j| h[j] * h[k - j]).sum();
            h[k] = (self.0[k] - cross) / (2.0 * h[0]);
        }
        Self(h)
    }

    fn ln(&self) -> Self {
        let f = &self.0;
        let mut g = [0.0; N];
        g[0] = f[0].ln();
        for k in 1..N {
            let cross: f64 = (1..k).map(|j| j as f64 * g[j] * f[k - j]).sum();
            g[k] = (k as f64 * f[k] - cross) / (k as f64 * f[0]);
        }
        Self(g)
    }
}

/// Highest supported expansion order.
pub const MAX_ORDER: usize = 6;

/// Expansion coefficients of the rod potential about z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrostaticCoeffs {
    /// α_j for j = 1..=max_order, in V/m^j.
    pub alpha: Vec<f64>,
    /// α_j z₀^j / V₀, dimensionless.
    pub normalized: Vec<f64>,
}

fn normalized_series(a: f64, b: f64) -> Series<{ MAX_ORDER + 1 }> {
    // lengths in units of z₀, so u = z − 1
    let mut u = Series::constant(-1.0);
    u.0[1] = 1.0;
    let q = u.mul(&u).add(&Series::constant(b * b));
    let s = q.add(&Series::constant(a * a)).sqrt();
    let sa = s.add(&Series::constant(a));
    sa.ln().scale(4.0).add(&q.ln().scale(-2.0))
}

/// α_j (j = 1..=max_order) from the exact Taylor coefficients of V_e(0, z).
pub fn electrostatic_coeffs(geom: &ElectrodeGeometry, max_order: usize) -> Result<ElectrostaticCoeffs> {
    geom.validate()?;
    if max_order == 0 || max_order > MAX_ORDER {
        return Err(Error::invalid(
            "max_order",
            format!("must be in 1..={MAX_ORDER}, got {max_order}"),
        ));
    }
    let z0 = geom.standoff;
    let series = normalized_series(geom.half_length / z0, geom.half_separation / z0);
    let normalized: Vec<f64> = series.0[1..=max_order].to_vec();
    let alpha = normalized
        .iter()
        .enumerate()
        .map(|(i, c)| c * geom.potential / z0.powi(i as i32 + 1))
        .collect();
    Ok(ElectrostaticCoeffs { alpha, normalized })
}

/// j-th central finite difference of `f` at 0 with step h.
fn central_difference(f: &dyn Fn(f64) -> f64, j: usize, h: f64) -> f64 {
    // binomial stencil on the half-integer-free grid ±h, ±2h, ...
    let (nodes, weights): (&[f64], &[f64]) = match j {
        1 => (&[-1.0, 1.0], &[-0.5, 0.5]),
        2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0]),
        3 => (&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5]),
        4 => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        5 => (
            &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            &[-0.5, 2.0, -2.5, 2.5, -2.0, 0.5],
        ),
        6 => (
            &[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            &[1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0],
        ),
        _ => unreachable!(),
    };
    let sum: f64 = nodes.iter().zip(weights).map(|(x, w)| w * f(x * h)).sum();
    sum / h.powi(j as i32)
}

/// Normalized α_j by Richardson-extrapolated central differences.
///
/// Independent of the series arithmetic, used as a cross-check.
pub fn electrostatic_coeffs_fd(geom: &ElectrodeGeometry, max_order: usize) -> Result<Vec<f64>> {
    geom.validate()?;
    if max_order == 0 || max_order > MAX_ORDER {
        return Err(Error::invalid(
            "max_order",
            format!("must be in 1..={MAX_ORDER}, got {max_order}"),
        ));
    }
    let z0 = geom.standoff;
    let scaled = ElectrodeGeometry {
        half_length: geom.half_length / z0,
        half_separation: geom.half_separation / z0,
        standoff: 1.0,
        potential: 1.0,
    };
    let f = |z: f64| scaled.increment_per_volt(z);
    let scale = geom.half_separation.min(geom.standoff) / z0;
    let mut out = Vec::with_capacity(max_order);
    let mut factorial = 1.0;
    for j in 1..=max_order {
        factorial *= j as f64;
        out.push(richardson(&f, j, 0.2 * scale) / factorial);
    }
    Ok(out)
}

/// Neville tableau over h, h/2, h/4, … for an even-error central stencil,
/// stopping once the extrapolation error estimate stops improving.
fn richardson(f: &dyn Fn(f64) -> f64, j: usize, h0: f64) -> f64 {
    // Four halvings balance O(h^8) truncation against roundoff ~ ε/h^(j-1)
    // once f is evaluated as an increment.
    const LEVELS: usize = 4;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut h = h0;
    for i in 0..LEVELS {
        table[i][0] = central_difference(f, j, h);
        let mut factor = 1.0;
        for k in 1..=i {
            factor *= 4.0;
            table[i][k] = table[i][k - 1] + (table[i][k - 1] - table[i - 1][k - 1]) / (factor - 1.0);
        }
        h *= 0.5;
    }
    table[LEVELS - 1][LEVELS - 1]
}

/// The b in `bracket` (metres) where α₃ changes sign, by bisection.
pub fn alpha3_root(geom: &ElectrodeGeometry, bracket: (f64, f64)) -> Result<f64> {
    let alpha3 = |b: f64| -> Result<f64> {
        let g = ElectrodeGeometry {
            half_separation: b,
            ..*geom
        };
        Ok(electrostatic_coeffs(&g, 3)?.normalized[2])
    };
    let (mut lo, mut hi) = bracket;
    let mut f_lo = alpha3(lo)?;
    let f_hi = alpha3(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::invalid(
            "bracket",
            format!("alpha_3 does not change sign on [{lo}, {hi}]"),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = alpha3(mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// ζ = −2α₂/(mω²) − 1.
pub fn control_mapping(alpha2: f64, unit: &UnitSystem) -> f64 {
    -2.0 * alpha2 / (unit.mass * unit.omega * unit.omega) - 1.0
}

/// α₂ = −(1 + ζ)mω²/2.
pub fn alpha2_for_zeta(zeta: f64, unit: &UnitSystem) -> f64 {
    -(1.0 + zeta) * unit.mass * unit.omega * unit.omega / 2.0
}
