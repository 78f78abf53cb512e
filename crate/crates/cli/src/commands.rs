//! One function per subcommand. Each fills a run directory and returns the
//! scalar results that go into the manifest.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use dwcat::analysis::{fidelity_to_level, linspace, populations, wigner, WignerGrid};
use dwcat::control::{RampKind, RampSchedule, TransitionSet};
use dwcat::device::{
    alpha2_for_zeta, alpha3_root, duffing_gamma, elastic_params, electrostatic_coeffs, ElectrodeGeometry,
};
use dwcat::dynamics::{evolve, run_stage2, run_stage3, ConvergenceReport, DensityMatrix, ProtocolConfig};
use dwcat::readout::output_spectrum;
use dwcat::spectral::{build_basis, eigenvalues, relative_error, Parity, ScaledBasis};
use dwcat::units::UnitSystem;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{set_path, Config};
use crate::output::{RunDir, StateFile};
use crate::CliError;

fn parity_code(p: Parity) -> i8 {
    match p {
        Parity::Even => 1,
        Parity::Odd => -1,
        Parity::Undefined => 0,
    }
}

pub fn eigen(config: &Config, run: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let e = &config.eigen;
    if e.points == 0 || !(e.zeta_max >= e.zeta_min) {
        return Err(CliError::Config("eigen: need points > 0 and zeta_max >= zeta_min".into()));
    }
    let pc = config.protocol_config();
    let zetas = linspace(e.zeta_min, e.zeta_max, e.points);
    let systems = zetas
        .par_iter()
        .map(|&z| pc.eigensystem(z))
        .collect::<Result<Vec<_>, _>>()?;
    let dim = config.basis.dim;
    let mut energies = String::from("zeta");
    let mut parities = String::from("zeta");
    let mut gaps = String::from("zeta");
    for n in 0..dim {
        let _ = write!(energies, ",e{n}");
        let _ = write!(parities, ",p{n}");
        if n > 0 {
            let _ = write!(gaps, ",d{n}0");
        }
    }
    for (z, eig) in zetas.iter().zip(&systems) {
        let _ = write!(energies, "\n{z:.17e}");
        let _ = write!(parities, "\n{z:.17e}");
        let _ = write!(gaps, "\n{z:.17e}");
        for n in 0..dim {
            let _ = write!(energies, ",{:.17e}", eig.energies[n]);
            let _ = write!(parities, ",{}", parity_code(eig.parities[n]));
            if n > 0 {
                let _ = write!(gaps, ",{:.17e}", eig.gap(n, 0));
            }
        }
    }
    run.write("eigenvalues.csv", energies + "\n")?;
    run.write("parities.csv", parities + "\n")?;
    run.write("gaps.csv", gaps + "\n")?;
    run.log(format!("{} eigensystems at dim {dim}", zetas.len()));

    let mut calibration = Vec::new();
    if e.calibration {
        let levels = e.calibration_levels.min(dim);
        let mut table = String::from("zeta,n,e_low,e_high,eps");
        for zeta in [config.basis.zeta_switch, pc.zeta_f] {
            let params = pc.potential(zeta);
            let low = eigenvalues(&params, &build_basis(zeta, &config.basis)?)?;
            let high = eigenvalues(&params, &build_basis(zeta, &config.basis.with_dim(e.calibration_dim))?)?;
            let eps = relative_error(&high, &low[..levels])?;
            for (n, v) in eps.iter().enumerate() {
                let _ = write!(table, "\n{zeta:.17e},{n},{:.17e},{:.17e},{v:.17e}", low[n], high[n]);
            }
            let max = eps.iter().copied().fold(0.0, f64::max);
            run.log(format!("calibration at zeta = {zeta:e}: max eps = {max:.3e}"));
            calibration.push(json!({ "zeta": zeta, "max_eps": max }));
        }
        run.write("calibration.csv", table + "\n")?;
    }
    Ok(json!({
        "points": zetas.len(),
        "dim": dim,
        "c1": config.basis.c1,
        "c2": config.basis.c2,
        "calibration_dim": e.calibration_dim,
        "calibration": calibration,
    }))
}

/// Scalar outcome of one protocol run.
pub struct ProtocolRun {
    pub stage2_fidelity: f64,
    pub final_fidelity: f64,
    pub trajectory_csv: String,
    pub state: StateFile,
    pub final_state: DensityMatrix,
    pub final_basis: ScaledBasis,
    pub steps: usize,
    pub convergence: Option<ConvergenceReport>,
}

pub fn run_protocol(config: &Config) -> Result<ProtocolRun, CliError> {
    let pc = config.protocol_config();
    let stage2 = run_stage2(&pc)?;
    let stage2_fidelity = match &stage2.trajectory {
        Some(t) => t.final_fidelity(),
        None => fidelity_to_level(&stage2.state, &pc.eigensystem(pc.zeta_c)?, 0)?,
    };
    let stage3 = run_stage3(&pc, &stage2)?;
    let convergence = if config.protocol.convergence_check {
        Some(dwcat::dynamics::convergence_check(&pc, &stage2)?)
    } else {
        None
    };
    let final_fidelity = stage3.final_fidelity();
    let trajectory = match stage2.trajectory {
        Some(mut t) => {
            t.extend(stage3);
            t
        }
        None => stage3,
    };
    Ok(ProtocolRun {
        stage2_fidelity,
        final_fidelity,
        trajectory_csv: trajectory.to_csv(),
        state: StateFile::new(pc.zeta_f, &trajectory.final_basis, &trajectory.final_state),
        final_state: trajectory.final_state,
        final_basis: trajectory.final_basis,
        steps: trajectory.steps,
        convergence,
    })
}

fn wigner_of(config: &Config, rho: &DensityMatrix, basis: &ScaledBasis) -> Result<WignerGrid, CliError> {
    let w = &config.wigner;
    Ok(wigner(
        rho,
        basis,
        (w.x_min, w.x_max),
        (w.p_min, w.p_max),
        (w.resolution, w.resolution),
    )?)
}

fn wigner_summary(grid: &WignerGrid) -> serde_json::Value {
    json!({
        "integral": grid.integral(),
        "min_value": grid.min_value(),
        "parity_from_origin": grid.value_at_origin().map(|w| w * std::f64::consts::PI),
        "support_warning": grid.support_warning,
    })
}

pub fn protocol(config: &Config, run: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let out = run_protocol(config)?;
    run.log(format!("stage 2 fidelity {:.6}", out.stage2_fidelity));
    run.log(format!("final fidelity {:.6} after {} steps", out.final_fidelity, out.steps));
    run.write("trajectory.csv", &out.trajectory_csv)?;
    run.write_json("final_state.json", &out.state)?;
    let grid = wigner_of(config, &out.final_state, &out.final_basis)?;
    if grid.support_warning {
        run.log("warning: Wigner grid does not hold the state");
        eprintln!("warning: Wigner grid does not hold the final state; widen [wigner] ranges");
    }
    run.write("wigner.csv", grid.to_csv())?;
    println!("stage 2 fidelity: {:.6}", out.stage2_fidelity);
    println!("final fidelity: {:.6}", out.final_fidelity);
    Ok(json!({
        "stage2_fidelity": out.stage2_fidelity,
        "final_fidelity": out.final_fidelity,
        "final_purity": out.final_state.purity(),
        "final_parity": out.final_state.parity(),
        "steps": out.steps,
        "convergence": out.convergence,
        "wigner": wigner_summary(&grid),
    }))
}

/// Parameter values of every point of the cartesian product, first axis
/// slowest.
fn sweep_points(config: &Config) -> Result<Vec<Vec<toml::Value>>, CliError> {
    let axes = &config.sweep.axes;
    if axes.is_empty() {
        return Err(CliError::Config("sweep: no [[sweep.axes]] given".into()));
    }
    let mut total: usize = 1;
    for a in axes {
        if a.values.is_empty() {
            return Err(CliError::Config(format!("sweep axis `{}` has no values", a.name)));
        }
        total = total.saturating_mul(a.values.len());
    }
    if total > config.sweep.max_points {
        return Err(CliError::Config(format!(
            "sweep has {total} points, above sweep.max_points = {}",
            config.sweep.max_points
        )));
    }
    let mut points = vec![Vec::new()];
    for a in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                a.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn csv_field(v: &toml::Value) -> String {
    let s = match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

struct PointOutcome {
    index: usize,
    result: Result<(f64, f64), CliError>,
    seconds: f64,
}

pub fn sweep(config: &Config, run: &mut RunDir, seed: Option<u64>) -> Result<serde_json::Value, CliError> {
    let points = sweep_points(config)?;
    let base = toml::Value::try_from(config).map_err(|e| CliError::Config(e.to_string()))?;
    let names: Vec<&str> = config.sweep.axes.iter().map(|a| a.name.as_str()).collect();
    run.log(format!("{} points over {}", points.len(), names.join(" x ")));
    let root = run.path().to_path_buf();

    let mut outcomes: Vec<PointOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(index, values)| {
            let start = Instant::now();
            let result = run_point(&base, &names, values, &root.join(format!("point-{index:04}")), seed);
            PointOutcome {
                index,
                result,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    outcomes.sort_by_key(|o| o.index);

    let mut table = String::from("index");
    for n in &names {
        let _ = write!(table, ",{n}");
    }
    table.push_str(",stage2_fidelity,final_fidelity,runtime_s,status\n");
    let mut failures = 0;
    for o in &outcomes {
        let _ = write!(table, "{}", o.index);
        for v in &points[o.index] {
            let _ = write!(table, ",{}", csv_field(v));
        }
        match &o.result {
            Ok((f2, f)) => {
                let _ = writeln!(table, ",{f2:.17e},{f:.17e},{:.3},ok", o.seconds);
            }
            Err(e) => {
                failures += 1;
                let msg = e.to_string().replace(['\n', ','], " ");
                let _ = writeln!(table, ",,,{:.3},error: {msg}", o.seconds);
                run.log(format!("point {} failed: {e}", o.index));
            }
        }
    }
    run.write("sweep.csv", table)?;
    println!("sweep: {} points, {failures} failed", outcomes.len());
    if failures == outcomes.len() {
        // nothing to report; surface the first failure's exit class
        if let Some(Err(e)) = outcomes.into_iter().next().map(|o| o.result) {
            return Err(e);
        }
    }
    Ok(json!({ "points": points.len(), "failures": failures }))
}

fn run_point(
    base: &toml::Value,
    names: &[&str],
    values: &[toml::Value],
    dir: &Path,
    seed: Option<u64>,
) -> Result<(f64, f64), CliError> {
    let mut value = base.clone();
    for (n, v) in names.iter().zip(values) {
        set_path(&mut value, n, v.clone())?;
    }
    let mut config = Config::from_value(value)?;
    config.sweep = Default::default();
    let mut run = RunDir::create(dir)?;
    let out = run_protocol(&config)?;
    run.write("trajectory.csv", &out.trajectory_csv)?;
    let results = json!({
        "stage2_fidelity": out.stage2_fidelity,
        "final_fidelity": out.final_fidelity,
        "steps": out.steps,
        "convergence": out.convergence,
    });
    run.finish("protocol", &config, seed, results)?;
    Ok((out.stage2_fidelity, out.final_fidelity))
}

pub fn spectrum(config: &Config, run: &mut RunDir, base_dir: &Path) -> Result<serde_json::Value, CliError> {
    let s = &config.spectrum;
    let path = s
        .state
        .as_ref()
        .ok_or_else(|| CliError::Config("spectrum.state must name a saved state file".into()))?;
    let path = base_dir.join(path);
    let file = StateFile::load(&path)?;
    let pc = config.protocol_config();
    let basis = build_basis(pc.zeta_f, &pc.basis)?;
    if !file.basis()?.same_frame(&basis) {
        return Err(CliError::Config(format!(
            "state in {} is not in the basis of zeta_f = {} (dim {}, omega0 {})",
            path.display(),
            pc.zeta_f,
            basis.dim,
            basis.omega0
        )));
    }
    if s.points < 2 || !(s.omega_max > s.omega_min) {
        return Err(CliError::Config("spectrum: need points >= 2 and omega_max > omega_min".into()));
    }
    let eig = pc.eigensystem(pc.zeta_f)?;
    let bath = config.bath();
    let axis = linspace(s.omega_min, s.omega_max, s.points);
    let mut times: Vec<f64> = s.hold_times.iter().map(|t| t.resolve(&config.unit)).collect();
    times.sort_by(f64::total_cmp);

    let mut rho = file.state()?;
    let mut now = 0.0;
    let mut pop_table = String::from("time");
    for n in 0..eig.dim() {
        let _ = write!(pop_table, ",p{n}");
    }
    let mut summary = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        if t > now {
            rho = hold(&pc, &rho, now, t, bath.as_ref())?;
            now = t;
        }
        let pops = populations(&rho, &eig)?;
        let clipped: Vec<f64> = pops.iter().map(|p| p.max(0.0)).collect();
        let spectrum = output_spectrum(&clipped, &eig, &config.cavity(), bath.as_ref(), &axis)?;
        run.write(&format!("spectrum_{k:02}.csv"), spectrum.to_csv())?;
        run.write(
            &format!("lines_{k:02}.json"),
            spectrum.lines_json().map_err(|e| CliError::Io(e.to_string()))?,
        )?;
        let _ = write!(pop_table, "\n{t:.17e}");
        for p in &pops {
            let _ = write!(pop_table, ",{p:.17e}");
        }
        let peaks: Vec<f64> = spectrum.peaks().iter().take(8).map(|p| p.0).collect();
        run.log(format!("t = {t}: ground population {:.6}", pops[0]));
        summary.push(json!({ "time": t, "ground_population": pops[0], "peaks": peaks }));
    }
    run.write("populations.csv", pop_table + "\n")?;
    Ok(json!({ "state": path.display().to_string(), "holds": summary }))
}

/// Free evolution at fixed ζ_f over [t0, t1].
fn hold(
    pc: &ProtocolConfig,
    rho: &DensityMatrix,
    t0: f64,
    t1: f64,
    bath: Option<&dwcat::dynamics::BathParams>,
) -> Result<DensityMatrix, CliError> {
    let schedule = RampSchedule::new(RampKind::Linear, pc.zeta_f, pc.zeta_f, t1 - t0, t0)?;
    let traj = evolve(
        rho,
        &schedule,
        &TransitionSet::empty(),
        bath,
        &pc.potential(pc.zeta_f),
        &pc.basis,
        &pc.stepping,
    )?;
    Ok(traj.final_state)
}

pub fn design(config: &Config, run: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let d = &config.design;
    let elastic = elastic_params(&d.membrane, d.mode, d.omega)?;
    let unit = UnitSystem::new(elastic.mass, elastic.omega, elastic.beta)?;
    let gamma = duffing_gamma(elastic.mass, elastic.omega, elastic.beta);
    let coeffs = electrostatic_coeffs(&d.electrodes, d.max_order)?;
    let z0 = d.electrodes.standoff;
    if d.b_points < 2 || !(d.b_min > 0.0 && d.b_max > d.b_min) {
        return Err(CliError::Config("design: need b_points >= 2 and 0 < b_min < b_max".into()));
    }

    let grid = linspace(d.b_min, d.b_max, d.b_points);
    let rows = grid
        .par_iter()
        .map(|&b| {
            let g = ElectrodeGeometry {
                half_separation: b * z0,
                ..d.electrodes
            };
            electrostatic_coeffs(&g, d.max_order).map(|c| (b, c.normalized))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = String::from("b_over_z0");
    for j in 1..=d.max_order {
        let _ = write!(table, ",alpha{j}");
    }
    for (b, row) in &rows {
        let _ = write!(table, "\n{b:.17e}");
        for v in row {
            let _ = write!(table, ",{v:.17e}");
        }
    }
    run.write("alpha_grid.csv", table + "\n")?;

    let alpha3_zero = if d.max_order >= 3 {
        alpha3_root(&d.electrodes, (d.b_min * z0, d.b_max * z0)).ok().map(|b| b / z0)
    } else {
        None
    };
    // α₂ per volt at the configured geometry sets the voltage for each ζ
    let alpha2_per_volt = d.max_order.ge(&2).then(|| coeffs.alpha[1] / d.electrodes.potential);
    let pc = config.protocol_config();
    let mapping: Vec<serde_json::Value> = [-1.0, pc.zeta_c, 0.0, pc.zeta_f]
        .iter()
        .map(|&zeta| {
            let a2 = alpha2_for_zeta(zeta, &unit);
            json!({
                "zeta": zeta,
                "alpha2": a2,
                "voltage": alpha2_per_volt.map(|k| a2 / k),
            })
        })
        .collect();
    let report = json!({
        "mass": elastic.mass,
        "beta": elastic.beta,
        "omega": elastic.omega,
        "gamma": gamma,
        "z_zpm": unit.z_zpm(),
        "alpha": coeffs.alpha,
        "alpha_normalized": coeffs.normalized,
        "alpha3_zero_b_over_z0": alpha3_zero,
        "zeta_alpha2": mapping,
    });
    run.write_json("design.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(report)
}

pub fn wigner_cmd(config: &Config, run: &mut RunDir, base_dir: &Path) -> Result<serde_json::Value, CliError> {
    let (rho, basis, source) = match &config.wigner.state {
        Some(p) => {
            let path = base_dir.join(p);
            let file = StateFile::load(&path)?;
            (file.state()?, file.basis()?, path.display().to_string())
        }
        None => {
            let pc = config.protocol_config();
            let eig = pc.eigensystem(pc.zeta_f)?;
            let rho = DensityMatrix::pure_real(&eig.ground_state().into_owned())?;
            (rho, eig.basis, format!("ground state at zeta = {}", pc.zeta_f))
        }
    };
    let grid = wigner_of(config, &rho, &basis)?;
    if grid.support_warning {
        run.log("warning: Wigner grid does not hold the state");
        eprintln!("warning: Wigner grid does not hold the state; widen [wigner] ranges");
    }
    run.write("wigner.csv", grid.to_csv())?;
    let mut summary = wigner_summary(&grid);
    summary["source"] = json!(source);
    summary["parity"] = json!(rho.parity());
    Ok(summary)
}
