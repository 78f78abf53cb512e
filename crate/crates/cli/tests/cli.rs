use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dwcat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwcat"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn results(run: &Path) -> Value {
    let text = std::fs::read_to_string(run.join("manifest.json")).unwrap();
    serde_json::from_str::<Value>(&text).unwrap()["results"].clone()
}

/// Fast closed preparation: adiabatic softening, default CD ramp.
const FAST: &[&str] = &[
    "--override",
    "protocol.closed=true",
    "--override",
    "protocol.stage2_mode=\"adiabatic\"",
];

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().chain(FAST).copied().collect()
}

#[test]
fn design_reports_device_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dwcat(tmp.path(), &["design", "--out", "d"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = results(&tmp.path().join("d"));
    let beta = r["beta"].as_f64().unwrap();
    assert!((beta / 3.3e13 - 1.0).abs() < 0.02);
    assert!((r["gamma"].as_f64().unwrap() / 3.1e-8 - 1.0).abs() < 0.01);
    let root = r["alpha3_zero_b_over_z0"].as_f64().unwrap();
    assert!((root - 1.0 / 3f64.sqrt()).abs() < 1e-3);
    let grid = std::fs::read_to_string(tmp.path().join("d/alpha_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 97);
}

#[test]
fn eigen_writes_one_row_per_zeta() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dwcat(tmp.path(), &["eigen", "--out", "e"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("e/eigenvalues.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 51);
    assert!(rows.iter().all(|r| r.split(',').count() == 51));
    for c in results(&tmp.path().join("e"))["calibration"].as_array().unwrap() {
        assert!(c["max_eps"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn protocol_replays_bit_for_bit_and_feeds_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dwcat(tmp.path(), &with_fast(&["protocol", "--out", "a"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final fidelity"));
    let first = results(&tmp.path().join("a"));
    assert!(first["final_fidelity"].as_f64().unwrap() >= 0.999);

    let replay = dwcat(tmp.path(), &["protocol", "--config", "a/manifest.json", "--out", "b"]);
    assert!(replay.status.success());
    let second = results(&tmp.path().join("b"));
    assert_eq!(first["final_fidelity"], second["final_fidelity"]);
    assert_eq!(first["stage2_fidelity"], second["stage2_fidelity"]);

    let traj = std::fs::read_to_string(tmp.path().join("a/trajectory.csv")).unwrap();
    let samples = dwcat::dynamics::samples_from_csv(&traj).unwrap();
    assert_eq!(samples.last().unwrap().fidelity, first["final_fidelity"].as_f64().unwrap());
    let w = std::fs::read_to_string(tmp.path().join("a/wigner.csv")).unwrap();
    let grid = dwcat::analysis::WignerGrid::from_csv(&w).unwrap();
    assert_eq!(grid.to_csv(), w);

    let spectrum_run = dwcat(
        tmp.path(),
        &with_fast(&[
            "spectrum",
            "--out",
            "s",
            "--override",
            "spectrum.state=\"a/final_state.json\"",
        ]),
    );
    assert!(spectrum_run.status.success(), "{}", String::from_utf8_lossy(&spectrum_run.stderr));
    let s = std::fs::read_to_string(tmp.path().join("s/spectrum_00.csv")).unwrap();
    let values: Vec<f64> = s.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 4001);
    assert!(values.iter().all(|v| *v >= 0.0));
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("sweep.toml"),
        r#"
[protocol]
closed = true
stage2_mode = "adiabatic"

[[sweep.axes]]
name = "protocol.transitions"
values = ["none", "up_to:4"]

[[sweep.axes]]
name = "protocol.zeta_f"
values = [3e-4, -1.0]
"#,
    )
    .unwrap();
    let columns = |dir: &str| -> Vec<String> {
        let out = dwcat(tmp.path(), &["sweep", "--config", "sweep.toml", "--out", dir, "--workers", if dir == "one" { "1" } else { "3" }]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(tmp.path().join(dir).join("sweep.csv")).unwrap();
        csv.lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},{},{}", f[0], f[3], f[4], f[6])
            })
            .collect()
    };
    let one = columns("one");
    let many = columns("many");
    assert_eq!(one, many);
    assert_eq!(one.len(), 5);
    // negative ζ_f is rejected per point while the sweep carries on
    assert!(one[2].contains("error") && one[4].contains("error"));
    assert!(one[1].ends_with(",ok") && one[3].ends_with(",ok"));
    assert!(tmp.path().join("one/point-0002/manifest.json").exists());
}

#[test]
fn exit_codes_separate_config_and_numerical_failures() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[protocol]\nzeta_c = -2.5e-4\nzeta_f = \n").unwrap();
    let out = dwcat(tmp.path(), &["protocol", "--config", "bad.toml", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = dwcat(tmp.path(), &["eigen", "--override", "basis.dimm=3", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dwcat(tmp.path(), &["wigner", "--override", "protocol.zeta_f=-3", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = dwcat(
        tmp.path(),
        &with_fast(&["protocol", "--override", "stepping.max_steps=10", "--out", "y"]),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(results(&tmp.path().join("y"))["error"].is_string());
}

#[test]
fn wigner_of_the_cat_holds_unit_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dwcat(tmp.path(), &["wigner", "--out", "w", "--seed", "7"]);
    assert!(out.status.success());
    let r = results(&tmp.path().join("w"));
    assert!((r["integral"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    assert!((r["parity_from_origin"].as_f64().unwrap() - r["parity"].as_f64().unwrap()).abs() < 1e-3);
    assert_eq!(r["support_warning"], Value::Bool(false));
}
