//! Fixed-step RK4 for the master equation in a (possibly co-moving) scaled
//! basis.
//!
//! States and operators are split into real and imaginary parts. Eigenvectors
//! of the double-well Hamiltonian are real, so the Hamiltonian is
//! Hr + iHi with Hr symmetric and Hi antisymmetric, and the jump operator is
//! real. That lets every commutator be formed from one real product and its
//! transpose.
//!
//! While the basis frequency r follows ζ the coefficients obey
//! i ċ = (H + (ṙ/2r) D) c with D = i(b†² − b²)/2, the generator of dilations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bath::{jump_operator_eigenbasis, BathParams};
use super::state::DensityMatrix;
use super::trajectory::{Sample, Trajectory};
use crate::control::{cd_even_truncated, RampSchedule, TransitionSet};
use crate::error::{Error, Result};
use crate::spectral::{build_basis, BasisPolicy, EigenSystem, Operators, PotentialParams, ScaledBasis};

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    /// Upper bound on h·(fastest rate); smaller is more accurate.
    pub accuracy: f64,
    /// Sampling segments per stage; the step is re-chosen on each.
    pub segments: usize,
    pub max_steps: usize,
    /// Steps between fresh diagonalizations; drives and jump operators are
    /// interpolated linearly in between.
    pub refresh_stride: usize,
    /// Steps between positivity checks of a mixed state.
    pub positivity_interval: usize,
    /// Abort once the smallest eigenvalue of ρ falls below −floor.
    pub positivity_floor: f64,
    /// Store a full state every this many segments (0: only the final one).
    pub snapshot_every: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            accuracy: 0.05,
            segments: 64,
            max_steps: 20_000_000,
            refresh_stride: 1,
            positivity_interval: 500,
            positivity_floor: 1e-4,
            snapshot_every: 0,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.accuracy > 0.0 && self.accuracy.is_finite()) {
            return Err(Error::invalid("accuracy", format!("must be positive, got {}", self.accuracy)));
        }
        if self.segments == 0 || self.refresh_stride == 0 || self.positivity_interval == 0 {
            return Err(Error::invalid(
                "stepping",
                "segments, refresh_stride and positivity_interval must be positive",
            ));
        }
        Ok(())
    }

    /// Same policy with half the step size.
    pub fn halved(&self) -> Self {
        Self {
            accuracy: self.accuracy / 2.0,
            refresh_stride: self.refresh_stride,
            ..*self
        }
    }
}

/// Trace drift that aborts an evolution.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-7;

/// Basis polynomials rearranged for fast Hamiltonian assembly.
struct Terms {
    kinetic: DMatrix<f64>,
    quadratic: DMatrix<f64>,
    quartic: DMatrix<f64>,
    cubic: DMatrix<f64>,
    x: DMatrix<f64>,
    dilation: DMatrix<f64>,
    parity: DVector<f64>,
}

impl Terms {
    fn new(dim: usize) -> Self {
        let ops = Operators::new(dim);
        Self {
            kinetic: &ops.p2 * -0.25,
            quadratic: &ops.x2 * -0.25,
            quartic: ops.x4.clone(),
            cubic: &ops.x3 / 3.0,
            x: ops.x.clone(),
            dilation: ops.dilation.clone(),
            parity: ops.parity(),
        }
    }

    /// Hr in ħω units for basis frequency r.
    fn hamiltonian_into(&self, out: &mut DMatrix<f64>, p: &PotentialParams, r: f64) {
        out.copy_from(&self.kinetic);
        *out *= r;
        add_scaled(out, p.zeta / r, &self.quadratic);
        add_scaled(out, p.gamma / (r * r), &self.quartic);
        if p.xi != 0.0 {
            add_scaled(out, p.xi / r.powf(1.5), &self.cubic);
        }
    }
}

/// Eigen-derived operators at one refresh time, in the basis of that time.
#[derive(Clone)]
struct Aux {
    t: f64,
    drive: Option<DMatrix<f64>>,
    jump: Option<DMatrix<f64>>,
}

/// Instantaneous generator of the evolution.
struct Generator {
    hr: DMatrix<f64>,
    hi: DMatrix<f64>,
    a: Option<DMatrix<f64>>,
    x: DMatrix<f64>,
}

struct Workspace {
    s: DMatrix<f64>,
    t: DMatrix<f64>,
}

trait Field: Clone {
    fn axpy(&mut self, a: f64, x: &Self);
    fn assign(&mut self, x: &Self);
    fn deriv(&self, g: &Generator, out: &mut Self, ws: &mut Workspace);
    fn rotate(&mut self, u: &DMatrix<f64>);
    fn is_finite(&self) -> bool;
}

#[derive(Clone)]
struct Pure {
    re: DVector<f64>,
    im: DVector<f64>,
}

#[derive(Clone)]
struct Mixed {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl Field for Pure {
    fn axpy(&mut self, a: f64, x: &Self) {
        self.re.axpy(a, &x.re, 1.0);
        self.im.axpy(a, &x.im, 1.0);
    }

    fn assign(&mut self, x: &Self) {
        self.re.copy_from(&x.re);
        self.im.copy_from(&x.im);
    }

    fn deriv(&self, g: &Generator, out: &mut Self, _ws: &mut Workspace) {
        // −i(Hr + iHi)(u + iv) = (Hr v + Hi u) + i(−Hr u + Hi v)
        out.re.gemv(1.0, &g.hr, &self.im, 0.0);
        out.re.gemv(1.0, &g.hi, &self.re, 1.0);
        out.im.gemv(-1.0, &g.hr, &self.re, 0.0);
        out.im.gemv(1.0, &g.hi, &self.im, 1.0);
    }

    fn rotate(&mut self, u: &DMatrix<f64>) {
        self.re = u * &self.re;
        self.im = u * &self.im;
    }

    fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }
}

/// out = s + sᵀ (sign = 1) or s − sᵀ (sign = −1), scaled by `scale`,
/// accumulated into `out` when `acc`.
fn sym_part(out: &mut DMatrix<f64>, s: &DMatrix<f64>, sign: f64, scale: f64, acc: bool) {
    let n = s.nrows();
    for j in 0..n {
        for i in 0..n {
            let v = scale * (s[(i, j)] + sign * s[(j, i)]);
            if acc {
                out[(i, j)] += v;
            } else {
                out[(i, j)] = v;
            }
        }
    }
}

impl Field for Mixed {
    fn axpy(&mut self, a: f64, x: &Self) {
        add_scaled(&mut self.re, a, &x.re);
        add_scaled(&mut self.im, a, &x.im);
    }

    fn assign(&mut self, x: &Self) {
        self.re.copy_from(&x.re);
        self.im.copy_from(&x.im);
    }

    fn deriv(&self, g: &Generator, out: &mut Self, ws: &mut Workspace) {
        let (r, i) = (&self.re, &self.im);
        // −i[H, ρ]: real part [Hr, I] + [Hi, R] = S + Sᵀ with S = Hr I + Hi R
        ws.s.gemm(1.0, &g.hr, i, 0.0);
        ws.s.gemm(1.0, &g.hi, r, 1.0);
        sym_part(&mut out.re, &ws.s, 1.0, 1.0, false);
        // imaginary part −[Hr, R] + [Hi, I] = Tᵀ − T with T = Hr R − Hi I
        ws.s.gemm(1.0, &g.hr, r, 0.0);
        ws.s.gemm(-1.0, &g.hi, i, 1.0);
        sym_part(&mut out.im, &ws.s, -1.0, -1.0, false);

        if let Some(a) = &g.a {
            // W = ρAᵀ − Aρ; Re W = Mᵀ − M (M = AR), Im W = −(N + Nᵀ) (N = AI)
            ws.s.gemm(1.0, a, r, 0.0);
            sym_part(&mut ws.t, &ws.s, -1.0, -1.0, false);
            ws.s.gemm(1.0, &g.x, &ws.t, 0.0);
            sym_part(&mut out.re, &ws.s, 1.0, 0.5, true);

            ws.s.gemm(1.0, a, i, 0.0);
            sym_part(&mut ws.t, &ws.s, 1.0, -1.0, false);
            ws.s.gemm(1.0, &g.x, &ws.t, 0.0);
            sym_part(&mut out.im, &ws.s, -1.0, 0.5, true);
        }
    }

    fn rotate(&mut self, u: &DMatrix<f64>) {
        self.re = u * &self.re * u.transpose();
        self.im = u * &self.im * u.transpose();
    }

    fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }
}

impl Mixed {
    fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_parts(&self.re, &self.im)
    }

    fn trace(&self) -> f64 {
        self.re.trace()
    }
}

impl Pure {
    fn to_density(&self) -> DensityMatrix {
        let dim = self.re.len();
        let mut re = DMatrix::zeros(dim, dim);
        let mut im = DMatrix::zeros(dim, dim);
        // (u + iv)(u − iv)ᵀ = uuᵀ + vvᵀ + i(vuᵀ − uvᵀ)
        re.ger(1.0, &self.re, &self.re, 0.0);
        re.ger(1.0, &self.im, &self.im, 1.0);
        im.ger(1.0, &self.im, &self.re, 0.0);
        im.ger(-1.0, &self.re, &self.im, 1.0);
        DensityMatrix::from_parts(&re, &im)
    }
}

/// Everything fixed during one call to [`evolve`].
struct Run<'a> {
    schedule: &'a RampSchedule,
    transitions: &'a TransitionSet,
    bath: Option<&'a BathParams>,
    params: PotentialParams,
    policy: &'a BasisPolicy,
    stepping: &'a StepPolicy,
    terms: Terms,
}

impl Run<'_> {
    fn dim(&self) -> usize {
        self.policy.dim
    }

    fn needs_aux(&self) -> bool {
        !self.transitions.is_empty() || self.bath.is_some()
    }

    fn eigensystem(&self, zeta: f64) -> Result<EigenSystem> {
        let r = self.policy.omega0(zeta);
        let basis = ScaledBasis::with_omega0(self.dim(), r)?;
        EigenSystem::solve(&self.params.at(zeta), &basis)
    }

    fn aux(&self, t: f64) -> Result<Aux> {
        if !self.needs_aux() {
            return Ok(Aux {
                t,
                drive: None,
                jump: None,
            });
        }
        let (zeta, zeta_dot) = self.schedule.value(t)?;
        let eig = self.eigensystem(zeta)?;
        let drive = if self.transitions.is_empty() {
            None
        } else {
            Some(cd_even_truncated(&eig, zeta_dot, self.transitions)?.generator)
        };
        let jump = match self.bath {
            Some(bath) => {
                let x = self.terms.x.clone() / eig.basis.omega0.sqrt();
                let z = eig.to_eigenbasis(&x);
                Some(eig.from_eigenbasis(&jump_operator_eigenbasis(&eig, &z, bath)?))
            }
            None => None,
        };
        Ok(Aux { t, drive, jump })
    }

    fn fill(&self, t: f64, left: &Aux, right: &Aux, g: &mut Generator) -> Result<()> {
        let (zeta, zeta_dot) = self.schedule.value(t)?;
        let r = self.policy.omega0(zeta);
        self.terms.hamiltonian_into(&mut g.hr, &self.params.at(zeta), r);
        let frame = 0.5 * self.policy.log_omega0_derivative(zeta) * zeta_dot;
        g.hi.copy_from(&self.terms.dilation);
        g.hi *= frame;
        let w = if right.t > left.t {
            ((t - left.t) / (right.t - left.t)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if let (Some(l), Some(rr)) = (&left.drive, &right.drive) {
            add_scaled(&mut g.hi, 1.0 - w, l);
            add_scaled(&mut g.hi, w, rr);
        }
        if let (Some(l), Some(rr)) = (&left.jump, &right.jump) {
            let a = g.a.get_or_insert_with(|| DMatrix::zeros(l.nrows(), l.ncols()));
            a.copy_from(l);
            *a *= 1.0 - w;
            add_scaled(a, w, rr);
            g.x.copy_from(&self.terms.x);
            g.x /= r.sqrt();
        } else {
            g.a = None;
        }
        Ok(())
    }

    /// Fastest rate of the generator at time t, for step selection.
    fn rate(&self, t: f64) -> Result<f64> {
        let (zeta, zeta_dot) = self.schedule.value(t)?;
        let r = self.policy.omega0(zeta);
        let mut hr = DMatrix::zeros(self.dim(), self.dim());
        self.terms.hamiltonian_into(&mut hr, &self.params.at(zeta), r);
        let ev = hr.symmetric_eigenvalues();
        let mut rate = ev.max() - ev.min();
        let frame = 0.5 * self.policy.log_omega0_derivative(zeta) * zeta_dot;
        rate += frame.abs() * induced_norm(&self.terms.dilation);
        let aux = self.aux(t)?;
        if let Some(d) = &aux.drive {
            rate += induced_norm(d);
        }
        if let Some(a) = &aux.jump {
            let x = &self.terms.x / r.sqrt();
            rate += induced_norm(&x) * induced_norm(a);
        }
        if !rate.is_finite() {
            return Err(Error::InvariantViolation {
                invariant: "finite generator",
                time: t,
                value: rate,
            });
        }
        Ok(rate)
    }

    fn sample<F: Field + Observe>(&self, t: f64, y: &F) -> Result<Sample> {
        let (zeta, _) = self.schedule.value(t)?;
        let eig = self.eigensystem(zeta)?;
        let ground = eig.state(0).into_owned();
        let trace = y.trace();
        if (trace - 1.0).abs() > TRACE_DRIFT_LIMIT {
            return Err(Error::InvariantViolation {
                invariant: "trace",
                time: t,
                value: trace - 1.0,
            });
        }
        Ok(Sample {
            time: t,
            zeta,
            fidelity: y.overlap(&ground).max(0.0).sqrt(),
            purity: y.purity(),
            trace,
            parity: y.parity(&self.terms.parity),
        })
    }
}

/// Scalar diagnostics both state kinds provide.
trait Observe {
    fn trace(&self) -> f64;
    fn purity(&self) -> f64;
    fn overlap(&self, psi: &DVector<f64>) -> f64;
    fn parity(&self, pi: &DVector<f64>) -> f64;
    fn density(&self) -> DensityMatrix;
    fn check_positive(&self, t: f64, floor: f64) -> Result<()>;
}

impl Observe for Pure {
    fn trace(&self) -> f64 {
        self.re.norm_squared() + self.im.norm_squared()
    }

    fn purity(&self) -> f64 {
        let n = self.trace();
        n * n
    }

    fn overlap(&self, psi: &DVector<f64>) -> f64 {
        let a = psi.dot(&self.re);
        let b = psi.dot(&self.im);
        a * a + b * b
    }

    fn parity(&self, pi: &DVector<f64>) -> f64 {
        (0..pi.len())
            .map(|k| pi[k] * (self.re[k] * self.re[k] + self.im[k] * self.im[k]))
            .sum()
    }

    fn density(&self) -> DensityMatrix {
        self.to_density()
    }

    fn check_positive(&self, _t: f64, _floor: f64) -> Result<()> {
        Ok(())
    }
}

impl Observe for Mixed {
    fn trace(&self) -> f64 {
        Mixed::trace(self)
    }

    fn purity(&self) -> f64 {
        self.re.norm_squared() + self.im.norm_squared()
    }

    fn overlap(&self, psi: &DVector<f64>) -> f64 {
        psi.dot(&(&self.re * psi))
    }

    fn parity(&self, pi: &DVector<f64>) -> f64 {
        (0..pi.len()).map(|k| pi[k] * self.re[(k, k)]).sum()
    }

    fn density(&self) -> DensityMatrix {
        self.to_density()
    }

    fn check_positive(&self, t: f64, floor: f64) -> Result<()> {
        let min = self.to_density().min_eigenvalue();
        if !min.is_finite() {
            return Err(Error::InvariantViolation {
                invariant: "finite state",
                time: t,
                value: min,
            });
        }
        if min < -floor {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }
}

/// out += a·x for matrices.
fn add_scaled(out: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    out.zip_apply(x, |o, v| *o += a * v);
}

/// √(‖M‖₁‖M‖∞), an upper bound on the spectral norm.
fn induced_norm(m: &DMatrix<f64>) -> f64 {
    let col = m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let row = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    (col * row).sqrt()
}

/// Orthogonal map taking coefficients from basis frequency r1 to r2.
pub(crate) fn dilation_map(dim: usize, r1: f64, r2: f64) -> DMatrix<f64> {
    let ops = Operators::new(dim);
    (ops.dilation * (0.5 * (r2 / r1).ln())).exp()
}

/// Integrates the master equation over `schedule`.
///
/// `rho0` must be expressed in the basis the policy assigns to the schedule's
/// first ζ. Without a bath the evolution is unitary and a pure initial state
/// is propagated as a vector.
pub fn evolve(
    rho0: &DensityMatrix,
    schedule: &RampSchedule,
    transitions: &TransitionSet,
    bath: Option<&BathParams>,
    params: &PotentialParams,
    policy: &BasisPolicy,
    stepping: &StepPolicy,
) -> Result<Trajectory> {
    params.validate()?;
    policy.validate()?;
    stepping.validate()?;
    if let Some(b) = bath {
        b.validate()?;
    }
    if rho0.dim() != policy.dim {
        return Err(Error::DimensionMismatch {
            expected: policy.dim,
            found: rho0.dim(),
        });
    }
    let run = Run {
        schedule,
        transitions,
        bath,
        params: *params,
        policy,
        stepping,
        terms: Terms::new(policy.dim),
    };
    let pure = bath.is_none() && (rho0.purity() - 1.0).abs() < 1e-12;
    if pure {
        let e = nalgebra::SymmetricEigen::new(rho0.matrix().clone());
        let k = e.eigenvalues.imax();
        let v = e.eigenvectors.column(k);
        let y = Pure {
            re: v.map(|c| c.re),
            im: v.map(|c| c.im),
        };
        integrate(&run, y)
    } else {
        let (re, im) = rho0.parts();
        integrate(&run, Mixed { re, im })
    }
}

/// Windows of the stage that lie in a single basis regime.
fn regime_windows(run: &Run) -> Result<Vec<(f64, f64)>> {
    let s = run.schedule;
    let (t0, t1) = (s.t_start, s.t_end());
    let capped = |t: f64| -> Result<bool> { Ok(run.policy.is_capped(s.value(t)?.0)) };
    let (c0, c1) = (capped(t0)?, capped(t1)?);
    if c0 == c1 {
        return Ok(vec![(t0, t1)]);
    }
    // ramps are monotone, so there is a single crossing
    let (mut lo, mut hi) = (t0, t1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if capped(mid)? == c0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(vec![(t0, lo), (hi, t1)])
}

fn integrate<F: Field + Observe>(run: &Run, mut y: F) -> Result<Trajectory> {
    let dim = run.dim();
    let windows = regime_windows(run)?;
    let total: f64 = windows.iter().map(|w| w.1 - w.0).sum();

    // segment grid and step counts, fixed before integrating
    let mut plan: Vec<(f64, f64, usize)> = Vec::new();
    for &(a, b) in &windows {
        let n_seg = ((run.stepping.segments as f64) * (b - a) / total).round().max(1.0) as usize;
        let mut prev_rate = run.rate(a)?;
        for k in 0..n_seg {
            let ta = a + (b - a) * k as f64 / n_seg as f64;
            let tb = if k + 1 == n_seg {
                b
            } else {
                a + (b - a) * (k + 1) as f64 / n_seg as f64
            };
            let next_rate = run.rate(tb)?;
            let tm = 0.5 * (ta + tb);
            let rate = prev_rate.max(next_rate).max(run.rate(tm)?);
            let steps = ((tb - ta) * rate / run.stepping.accuracy).ceil().max(1.0);
            if steps > run.stepping.max_steps as f64 {
                return Err(Error::StepUnderflow {
                    required: steps.min(usize::MAX as f64) as usize,
                    cap: run.stepping.max_steps,
                });
            }
            plan.push((ta, tb, steps as usize));
            prev_rate = next_rate;
        }
    }
    let required: usize = plan.iter().map(|p| p.2).sum();
    if required > run.stepping.max_steps {
        return Err(Error::StepUnderflow {
            required,
            cap: run.stepping.max_steps,
        });
    }

    let mut g = Generator {
        hr: DMatrix::zeros(dim, dim),
        hi: DMatrix::zeros(dim, dim),
        a: None,
        x: DMatrix::zeros(dim, dim),
    };
    let mut ws = Workspace {
        s: DMatrix::zeros(dim, dim),
        t: DMatrix::zeros(dim, dim),
    };
    let mut k1 = y.clone();
    let mut k2 = y.clone();
    let mut k3 = y.clone();
    let mut k4 = y.clone();
    let mut tmp = y.clone();

    let mut samples = vec![run.sample(run.schedule.t_start, &y)?];
    let mut snapshots = Vec::new();
    let mut steps_done = 0usize;
    let mut segment_index = 0usize;
    let mut prev_window_end: Option<f64> = None;

    for (seg, &(ta, tb, n_steps)) in plan.iter().enumerate() {
        // basis jump when crossing into the other regime
        if let Some(te) = prev_window_end.take() {
            let r1 = run.policy.omega0(run.schedule.value(te)?.0);
            let r2 = run.policy.omega0(run.schedule.value(ta)?.0);
            if (r2 / r1).ln().abs() > 1e-14 {
                y.rotate(&dilation_map(dim, r1, r2));
            }
        }
        let h = (tb - ta) / n_steps as f64;
        let stride = run.stepping.refresh_stride;
        let mut left = run.aux(ta)?;
        let mut step = 0usize;
        while step < n_steps {
            let block = stride.min(n_steps - step);
            let t_block_end = if step + block == n_steps {
                tb
            } else {
                ta + (step + block) as f64 * h
            };
            let right = run.aux(t_block_end)?;
            for _ in 0..block {
                let t = ta + step as f64 * h;
                run.fill(t, &left, &right, &mut g)?;
                y.deriv(&g, &mut k1, &mut ws);
                tmp.assign(&y);
                tmp.axpy(0.5 * h, &k1);
                run.fill(t + 0.5 * h, &left, &right, &mut g)?;
                tmp.deriv(&g, &mut k2, &mut ws);
                tmp.assign(&y);
                tmp.axpy(0.5 * h, &k2);
                tmp.deriv(&g, &mut k3, &mut ws);
                tmp.assign(&y);
                tmp.axpy(h, &k3);
                let t_next = if step + 1 == n_steps { tb } else { t + h };
                run.fill(t_next, &left, &right, &mut g)?;
                tmp.deriv(&g, &mut k4, &mut ws);
                y.axpy(h / 6.0, &k1);
                y.axpy(h / 3.0, &k2);
                y.axpy(h / 3.0, &k3);
                y.axpy(h / 6.0, &k4);
                step += 1;
                steps_done += 1;
                if steps_done % run.stepping.positivity_interval == 0 {
                    if !y.is_finite() {
                        return Err(Error::InvariantViolation {
                            invariant: "finite state",
                            time: t_next,
                            value: f64::NAN,
                        });
                    }
                    y.check_positive(t_next, run.stepping.positivity_floor)?;
                }
            }
            left = right;
        }
        if !y.is_finite() {
            return Err(Error::InvariantViolation {
                invariant: "finite state",
                time: tb,
                value: f64::NAN,
            });
        }
        samples.push(run.sample(tb, &y)?);
        segment_index += 1;
        if run.stepping.snapshot_every > 0 && segment_index % run.stepping.snapshot_every == 0 {
            snapshots.push((tb, y.density()));
        }
        // a window boundary follows when the next segment starts elsewhere
        if let Some(next) = plan.get(seg + 1) {
            if next.0 != tb {
                prev_window_end = Some(tb);
            }
        }
    }

    y.check_positive(run.schedule.t_end(), run.stepping.positivity_floor)?;
    let final_state = y.density();
    let final_basis = build_basis(run.schedule.zeta_end, run.policy)?;
    Ok(Trajectory {
        samples,
        snapshots,
        final_state,
        final_basis,
        steps: steps_done,
    })
}
