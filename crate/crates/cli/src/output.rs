//! Run directories: result files, a log, and the manifest that ties them
//! to the configuration that produced them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dwcat::dynamics::DensityMatrix;
use dwcat::spectral::ScaledBasis;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::CliError;

pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
    log: String,
    started: Instant,
    started_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
            log: String::new(),
            started: Instant::now(),
            started_unix: unix_now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, text)
    }

    pub fn log(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.log, "[{:9.3}s] {}", self.started.elapsed().as_secs_f64(), line.as_ref());
    }

    /// Writes the log and the manifest.
    pub fn finish(
        mut self,
        command: &str,
        config: &Config,
        seed: Option<u64>,
        results: serde_json::Value,
    ) -> Result<(), CliError> {
        let log = std::mem::take(&mut self.log);
        self.write("run.log", log)?;
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix: self.started_unix,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            config: config.clone(),
            derived: Derived::new(config),
            results,
            outputs: self.outputs.clone(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// Reserved: the pipeline is deterministic.
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub config: Config,
    pub derived: Derived,
    pub results: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Derived {
    pub gamma: f64,
    /// Metres.
    pub z_zpm: f64,
    /// ħω/k_B, kelvin.
    pub quantum_temperature: f64,
    pub dt1: f64,
    pub dt2: f64,
    /// Classical well minimum √(ζ_f/8γ) in zero-point units.
    pub lobe_position: f64,
    /// 1/(1 + N̄₀) for the Gibbs initial state.
    pub initial_ground_population: f64,
}

impl Derived {
    pub fn new(config: &Config) -> Self {
        let p = config.protocol_config();
        let gamma = config.unit.gamma();
        Self {
            gamma,
            z_zpm: config.unit.z_zpm(),
            quantum_temperature: config.unit.quantum_temperature(),
            dt1: p.dt1,
            dt2: p.dt2,
            lobe_position: (p.zeta_f.max(0.0) / (8.0 * gamma)).sqrt(),
            initial_ground_population: 1.0 / (1.0 + p.initial_occupation),
        }
    }
}

/// A density matrix with the oscillator basis it is written in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub zeta: f64,
    pub omega0: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateFile {
    pub fn new(zeta: f64, basis: &ScaledBasis, rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self {
            zeta,
            omega0: basis.omega0,
            re: rows(|c| c.re),
            im: rows(|c| c.im),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read state file {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn basis(&self) -> Result<ScaledBasis, CliError> {
        Ok(ScaledBasis::with_omega0(self.re.len(), self.omega0)?)
    }

    pub fn state(&self) -> Result<DensityMatrix, CliError> {
        let n = self.re.len();
        if self.im.len() != n || self.re.iter().chain(&self.im).any(|r| r.len() != n) {
            return Err(CliError::Config("state file matrices must be square and equal in size".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(self.re[i][j], self.im[i][j]));
        Ok(DensityMatrix::new(m)?)
    }
}
