//! Run configuration: a nested TOML file whose defaults are the headline
//! experiment, plus `--override key=value` patches.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dwcat::control::{RampKind, TransitionSet};
use dwcat::device::{ElectrodeGeometry, MembraneGeometry};
use dwcat::dynamics::{BathParams, ProtocolConfig, Stage2Mode, StepPolicy};
use dwcat::readout::CavityParams;
use dwcat::spectral::BasisPolicy;
use dwcat::units::UnitSystem;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// A duration given either in 1/ω or in microseconds.
///
/// Bare numbers and the `/omega` suffix mean 1/ω; `us` means µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Time {
    Dimensionless(f64),
    Micros(f64),
}

impl Time {
    pub fn resolve(self, unit: &UnitSystem) -> f64 {
        match self {
            Time::Dimensionless(t) => t,
            Time::Micros(us) => unit.micros_to_dimensionless(us),
        }
    }
}

impl FromStr for Time {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let number = |v: &str| -> Result<f64, String> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad time `{s}`: expected e.g. `110/omega` or `0.1us`"))
        };
        let t = if let Some(v) = s.strip_suffix("/omega") {
            Time::Dimensionless(number(v)?)
        } else if let Some(v) = s.strip_suffix("us").or_else(|| s.strip_suffix("µs")) {
            Time::Micros(number(v)?)
        } else {
            Time::Dimensionless(number(s)?)
        };
        let (Time::Dimensionless(v) | Time::Micros(v)) = t;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(format!("time `{s}` must be finite and non-negative"));
        }
        Ok(t)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Time::Dimensionless(t) => write!(f, "{t}/omega"),
            Time::Micros(t) => write!(f, "{t}us"),
        }
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => format!("{v}").parse().map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Counterdiabatic pairs written as `none`, `up_to:4` or `0-2,0-4`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions(pub TransitionSet);

impl FromStr for Transitions {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "none" || s.is_empty() {
            return Ok(Self(TransitionSet::empty()));
        }
        if let Some(level) = s.strip_prefix("up_to:") {
            let level: usize = level.trim().parse().map_err(|_| format!("bad level in `{s}`"))?;
            return Ok(Self(TransitionSet::up_to(level)));
        }
        let pairs = s
            .split(',')
            .map(|p| {
                let (n, m) = p.split_once('-').ok_or_else(|| format!("bad pair `{p}`, expected n-m"))?;
                let n = n.trim().parse().map_err(|_| format!("bad level in `{p}`"))?;
                let m = m.trim().parse().map_err(|_| format!("bad level in `{p}`"))?;
                Ok((n, m))
            })
            .collect::<Result<Vec<(usize, usize)>, String>>()?;
        TransitionSet::new(pairs).map(Self).map_err(|e| e.to_string())
    }
}

impl fmt::Display for Transitions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.0.pairs().iter().map(|(n, m)| format!("{n}-{m}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for Transitions {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Transitions {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub zeta_c: f64,
    pub zeta_f: f64,
    pub dt1: Time,
    pub dt2: Time,
    pub stage2_ramp: RampKind,
    pub stage3_ramp: RampKind,
    pub stage2_mode: Stage2Mode,
    pub transitions: Transitions,
    pub initial_occupation: f64,
    pub xi: f64,
    /// Drop the bath and run the unitary dynamics.
    pub closed: bool,
    pub stage2_refresh_stride: usize,
    /// Also rerun stage 3 at half the step and report the difference.
    pub convergence_check: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            zeta_c: p.zeta_c,
            zeta_f: p.zeta_f,
            dt1: Time::Dimensionless(p.dt1),
            dt2: Time::Dimensionless(p.dt2),
            stage2_ramp: p.stage2_ramp,
            stage3_ramp: p.stage3_ramp,
            stage2_mode: p.stage2_mode,
            transitions: Transitions(p.transitions),
            initial_occupation: p.initial_occupation,
            xi: p.xi,
            closed: false,
            stage2_refresh_stride: p.stage2_refresh_stride,
            convergence_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathSection {
    /// Kelvin.
    pub temperature: f64,
    pub quality_factor: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        let b = BathParams::default();
        Self {
            temperature: b.temperature,
            quality_factor: b.quality_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSection {
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub points: usize,
    /// Run the truncation calibration against `calibration_dim`.
    pub calibration: bool,
    pub calibration_dim: usize,
    pub calibration_levels: usize,
}

impl Default for EigenSection {
    fn default() -> Self {
        Self {
            zeta_min: -1.0,
            zeta_max: 3e-4,
            points: 50,
            calibration: true,
            calibration_dim: 1000,
            calibration_levels: 26,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerSection {
    /// Saved state to plot; the ground state at ζ_f when absent.
    pub state: Option<String>,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub resolution: usize,
}

impl Default for WignerSection {
    fn default() -> Self {
        use dwcat::analysis::{DEFAULT_P_RANGE, DEFAULT_RESOLUTION, DEFAULT_X_RANGE};
        Self {
            state: None,
            x_min: DEFAULT_X_RANGE.0,
            x_max: DEFAULT_X_RANGE.1,
            p_min: DEFAULT_P_RANGE.0,
            p_max: DEFAULT_P_RANGE.1,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Saved state written by `protocol`.
    pub state: Option<String>,
    /// Times after preparation at which to sample the spectrum.
    pub hold_times: Vec<Time>,
    pub kappa: f64,
    pub g: f64,
    pub line_floor: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        let c = CavityParams::default();
        Self {
            state: None,
            hold_times: vec![Time::Dimensionless(0.0)],
            kappa: c.kappa,
            g: c.g,
            line_floor: c.line_floor,
            omega_min: -0.2,
            omega_max: 0.2,
            points: 4001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub membrane: MembraneGeometry,
    pub mode: u32,
    /// Fix ω directly (rad/s) instead of deriving it from the tension.
    pub omega: Option<f64>,
    /// Electrode half-length a, half-separation b and standoff z₀, metres.
    pub electrodes: ElectrodeGeometry,
    pub max_order: usize,
    /// b/z₀ grid for the α_j table.
    pub b_min: f64,
    pub b_max: f64,
    pub b_points: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        let z0 = 1e-6;
        Self {
            membrane: MembraneGeometry::default(),
            mode: 1,
            omega: Some(dwcat::units::REFERENCE_OMEGA),
            electrodes: ElectrodeGeometry {
                half_length: 10.0 * z0,
                half_separation: z0 / 3f64.sqrt(),
                standoff: z0,
                potential: 1.0,
            },
            max_order: 4,
            b_min: 0.1,
            b_max: 2.0,
            b_points: 96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    /// Dotted path into the configuration, e.g. `protocol.dt2`.
    pub name: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<SweepAxis>,
    /// Largest allowed cartesian product.
    pub max_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axes: Vec::new(),
            max_points: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub protocol: ProtocolSection,
    pub bath: BathSection,
    pub unit: UnitSystem,
    pub basis: BasisPolicy,
    pub stepping: StepPolicy,
    pub eigen: EigenSection,
    pub wigner: WignerSection,
    pub spectrum: SpectrumSection,
    pub design: DesignSection,
    pub sweep: SweepSection,
}

impl Config {
    /// Reads `path` (or the defaults) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_str_with(&text, overrides)
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        // parse the text on its own first so errors carry its line numbers
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if overrides.is_empty() {
            return Ok(config);
        }
        let mut value = toml::Value::try_from(&config).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
            set_path(&mut value, key.trim(), parse_literal(raw.trim()))?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: toml::Value) -> Result<Self, CliError> {
        value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn bath(&self) -> Option<BathParams> {
        (!self.protocol.closed).then_some(BathParams {
            temperature: self.bath.temperature,
            quality_factor: self.bath.quality_factor,
            unit: self.unit,
        })
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let p = &self.protocol;
        ProtocolConfig {
            zeta_c: p.zeta_c,
            zeta_f: p.zeta_f,
            dt1: p.dt1.resolve(&self.unit),
            dt2: p.dt2.resolve(&self.unit),
            stage2_ramp: p.stage2_ramp,
            stage3_ramp: p.stage3_ramp,
            stage2_mode: p.stage2_mode,
            transitions: p.transitions.0.clone(),
            initial_occupation: p.initial_occupation,
            bath: self.bath(),
            xi: p.xi,
            unit: self.unit,
            basis: self.basis,
            stepping: self.stepping,
            stage2_refresh_stride: p.stage2_refresh_stride,
        }
    }

    pub fn cavity(&self) -> CavityParams {
        CavityParams {
            kappa: self.spectrum.kappa,
            g: self.spectrum.g,
            line_floor: self.spectrum.line_floor,
        }
    }
}

/// A TOML literal if it parses as one, otherwise a bare string.
pub fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets a dotted `path` inside a table, creating intermediate tables.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad key `{path}`")));
    }
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{}` is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("path has at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_parse_with_units() {
        let unit = UnitSystem::default();
        assert_eq!("110/omega".parse::<Time>().unwrap().resolve(&unit), 110.0);
        assert_eq!("42".parse::<Time>().unwrap().resolve(&unit), 42.0);
        let t = "0.1us".parse::<Time>().unwrap().resolve(&unit);
        assert!((t - 0.1e-6 * unit.omega).abs() < 1e-12);
        assert!("fast".parse::<Time>().is_err());
        assert!("-3/omega".parse::<Time>().is_err());
    }

    #[test]
    fn transitions_round_trip() {
        for s in ["none", "0-2,0-4,2-4", "0-6"] {
            let t: Transitions = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert_eq!("up_to:4".parse::<Transitions>().unwrap().0, TransitionSet::up_to(4));
        assert!("1-2".parse::<Transitions>().is_err());
    }

    #[test]
    fn overrides_patch_nested_keys() {
        let c = Config::from_str_with(
            "[protocol]\nzeta_f = 2e-4\n",
            &["protocol.dt2=0.1us".into(), "basis.dim=30".into(), "protocol.closed=true".into()],
        )
        .unwrap();
        assert_eq!(c.protocol.zeta_f, 2e-4);
        assert_eq!(c.protocol.dt2, Time::Micros(0.1));
        assert_eq!(c.basis.dim, 30);
        assert!(c.bath().is_none());
    }

    #[test]
    fn unknown_fields_are_reported_with_position() {
        let err = Config::from_str_with("[protocol]\nzeta_q = 1\n", &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("zeta_q") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        let back = Config::from_str_with(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
