//! `dwcat`: run spectra, preparation protocols, sweeps, readout spectra,
//! device reports and Wigner grids from a TOML configuration.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use output::RunDir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<dwcat::Error> for CliError {
    fn from(e: dwcat::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dwcat", version, about = "Double-well cat-state preparation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration, or a manifest.json to replay. Missing keys take
    /// the defaults of the headline experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (default: runs/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recorded in the manifest; the pipeline itself is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Patch a configuration key, e.g. `protocol.dt2=0.1us`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Spectrum, parities and gaps along a ζ grid, plus truncation calibration.
    Eigen,
    /// Full preparation: thermal start, softening, counterdiabatic ramp.
    Protocol,
    /// Protocol over the cartesian product of [[sweep.axes]].
    Sweep,
    /// Cavity output spectra of a saved state after hold times at ζ_f.
    Spectrum,
    /// Membrane and electrode parameter report.
    Design,
    /// Wigner function of a saved state or of the ground state at ζ_f.
    Wigner,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Protocol => "protocol",
            Command::Sweep => "sweep",
            Command::Spectrum => "spectrum",
            Command::Design => "design",
            Command::Wigner => "wigner",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = match cli.config.as_deref() {
        // a manifest from an earlier run replays that run's configuration
        Some(p) if p.extension().is_some_and(|e| e == "json") => {
            Config::from_str_with(&output::Manifest::load(p)?.config.to_toml(), &cli.overrides)?
        }
        path => Config::load(path, &cli.overrides)?,
    };
    // relative state paths are resolved against the config file's directory
    let base_dir = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let name = cli.command.name();
    let out = cli.out.clone().unwrap_or_else(|| Path::new("runs").join(name));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    let mut dir = RunDir::create(&out)?;
    dir.write("config.toml", config.to_toml())?;
    let results = pool.install(|| match cli.command {
        Command::Eigen => commands::eigen(&config, &mut dir),
        Command::Protocol => commands::protocol(&config, &mut dir),
        Command::Sweep => commands::sweep(&config, &mut dir, cli.seed),
        Command::Spectrum => commands::spectrum(&config, &mut dir, &base_dir),
        Command::Design => commands::design(&config, &mut dir),
        Command::Wigner => commands::wigner_cmd(&config, &mut dir, &base_dir),
    });
    let results = match results {
        Ok(r) => r,
        Err(e) => {
            dir.log(format!("aborted: {e}"));
            dir.finish(name, &config, cli.seed, serde_json::json!({ "error": e.to_string() }))?;
            return Err(e);
        }
    };
    dir.finish(name, &config, cli.seed, results)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dwcat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
