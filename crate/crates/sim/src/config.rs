//! Layered run configuration: built-in defaults, then a TOML file, then
//! command-line overrides.
//!
//! The file has two sections:
//!
//! ```toml
//! [system]
//! antennas = 8
//! power_dbm = 30.0
//!
//! [experiment]
//! sweep = "power"
//! values = [10.0, 20.0, 30.0]
//! trials = 50
//! modes = [{ access = "rsma", antenna = "ma", ris = "optimized" }]
//! ```
//!
//! Every key is optional. Unknown keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};

use rsma_core::config::{dbm_to_watts, Geometry, SystemConfig, DEFAULT_CARRIER_HZ, SPEED_OF_LIGHT};
use rsma_core::solver::{AccessMode, AntennaMode, RisMode};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub antennas: usize,
    pub users: usize,
    pub ris_elements: usize,
    /// Paths per fading matrix, shared by the transmit and receive sides.
    pub paths: usize,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub carrier_hz: f64,
    /// Movement region and minimum spacing, in wavelengths.
    pub x_min_wavelengths: f64,
    pub x_max_wavelengths: f64,
    pub min_spacing_wavelengths: f64,
    pub rician_factor: f64,
    pub pathloss_bs_user: f64,
    pub pathloss_bs_ris: f64,
    pub pathloss_ris_user: f64,
    pub reference_distance_m: f64,
    pub bs: [f64; 2],
    pub ris: [f64; 2],
    pub user_x: [f64; 2],
    pub user_y: [f64; 2],
    /// Master seed. `solve` uses it as the scenario seed; sweeps derive one
    /// seed per trial from it.
    pub seed: u64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let d = SystemConfig::default();
        let g = Geometry::default();
        SystemSection {
            antennas: d.antennas,
            users: d.users,
            ris_elements: d.ris_elements,
            paths: d.paths_tx,
            power_dbm: 30.0,
            noise_dbm: -80.0,
            carrier_hz: DEFAULT_CARRIER_HZ,
            x_min_wavelengths: -6.0,
            x_max_wavelengths: 6.0,
            min_spacing_wavelengths: 0.5,
            rician_factor: d.rician_factor,
            pathloss_bs_user: d.pathloss_bs_user,
            pathloss_bs_ris: d.pathloss_bs_ris,
            pathloss_ris_user: d.pathloss_ris_user,
            reference_distance_m: d.reference_distance,
            bs: g.bs,
            ris: g.ris,
            user_x: g.user_x,
            user_y: g.user_y,
            seed: 0,
        }
    }
}

impl SystemSection {
    /// The solver's view, checked against its invariants.
    pub fn to_system(&self) -> Result<SystemConfig, ConfigError> {
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(ConfigError::Invalid("carrier_hz must be positive".into()));
        }
        let wavelength = SPEED_OF_LIGHT / self.carrier_hz;
        let cfg = SystemConfig {
            antennas: self.antennas,
            users: self.users,
            ris_elements: self.ris_elements,
            paths_tx: self.paths,
            paths_rx: self.paths,
            power: dbm_to_watts(self.power_dbm),
            noise_power: vec![dbm_to_watts(self.noise_dbm); self.users],
            wavelength,
            x_min: self.x_min_wavelengths * wavelength,
            x_max: self.x_max_wavelengths * wavelength,
            min_spacing: self.min_spacing_wavelengths * wavelength,
            rician_factor: self.rician_factor,
            pathloss_bs_user: self.pathloss_bs_user,
            pathloss_bs_ris: self.pathloss_bs_ris,
            pathloss_ris_user: self.pathloss_ris_user,
            reference_distance: self.reference_distance_m,
            geometry: Geometry { bs: self.bs, ris: self.ris, user_x: self.user_x, user_y: self.user_y },
            seed: self.seed,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Transmit power in dBm.
    Power,
    /// Number of users.
    Users,
    /// Per-iteration traces at a few power levels.
    Convergence,
    /// Gradient-block timings; no solves.
    Benchmark,
}

impl SweepKind {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::Power => vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            SweepKind::Users => vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            SweepKind::Convergence => vec![20.0, 30.0],
            SweepKind::Benchmark => Vec::new(),
        }
    }

    /// Column label prefix used in trace file names.
    fn tag(self) -> &'static str {
        match self {
            SweepKind::Power | SweepKind::Convergence => "p",
            SweepKind::Users => "k",
            SweepKind::Benchmark => "b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Rsma,
    Sdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Antenna {
    /// Movable antennas.
    Ma,
    /// Fixed, equally spaced antennas.
    Fpa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ris {
    Optimized,
    Random,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub access: Access,
    pub antenna: Antenna,
    pub ris: Ris,
}

impl ModeSpec {
    pub fn solver_modes(self) -> (AccessMode, AntennaMode, RisMode) {
        let access = match self.access {
            Access::Rsma => AccessMode::Rsma,
            Access::Sdma => AccessMode::Sdma,
        };
        let antenna = match self.antenna {
            Antenna::Ma => AntennaMode::Movable,
            Antenna::Fpa => AntennaMode::Fixed,
        };
        let ris = match self.ris {
            Ris::Optimized => RisMode::Optimized,
            Ris::Random => RisMode::RandomFixed,
            Ris::None => RisMode::Absent,
        };
        (access, antenna, ris)
    }

    /// The four curves of the power and user sweeps.
    pub fn standard() -> Vec<ModeSpec> {
        let mut out = Vec::new();
        for access in [Access::Rsma, Access::Sdma] {
            for antenna in [Antenna::Ma, Antenna::Fpa] {
                out.push(ModeSpec { access, antenna, ris: Ris::Optimized });
            }
        }
        out
    }
}

/// Lowercase name of a mode component.
pub fn label<T: Serialize>(v: T) -> String {
    match Value::try_from(v) {
        Ok(Value::String(s)) => s,
        _ => unreachable!("unit enums serialize to strings"),
    }
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", label(self.access), label(self.antenna), label(self.ris))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub sweep: SweepKind,
    /// Sweep points; the kind's defaults when absent.
    pub values: Option<Vec<f64>>,
    pub trials: usize,
    pub modes: Vec<ModeSpec>,
    pub out: PathBuf,
    /// Trials (from the first) whose per-iteration traces are written; all
    /// of them for convergence sweeps when absent, none otherwise.
    pub trace_trials: Option<usize>,
    pub r_max: usize,
    pub eps_outer: f64,
    /// Record wall time per solve. Off by default so that reruns produce
    /// identical files.
    pub timing: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            sweep: SweepKind::Power,
            values: None,
            trials: 50,
            modes: ModeSpec::standard(),
            out: PathBuf::from("runs"),
            trace_trials: None,
            r_max: 50,
            eps_outer: 1e-3,
            timing: false,
        }
    }
}

impl ExperimentSection {
    pub fn sweep_values(&self) -> Vec<f64> {
        self.values.clone().unwrap_or_else(|| self.sweep.default_values())
    }

    pub fn traced_trials(&self) -> usize {
        self.trace_trials.unwrap_or(if self.sweep == SweepKind::Convergence { self.trials } else { 0 })
    }

    pub fn trace_id(&self, value: f64, mode: ModeSpec, trial: usize) -> String {
        format!("{}{}_{}_t{}", self.sweep.tag(), value, mode.to_string().replace('-', "_"), trial)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.trials == 0 {
            return invalid("experiment.trials must be at least 1");
        }
        if self.modes.is_empty() {
            return invalid("experiment.modes must not be empty");
        }
        if self.r_max == 0 {
            return invalid("experiment.r_max must be at least 1");
        }
        if !(self.eps_outer > 0.0) {
            return invalid("experiment.eps_outer must be positive");
        }
        let values = self.sweep_values();
        if self.sweep != SweepKind::Benchmark {
            if values.is_empty() {
                return invalid("experiment.values must not be empty");
            }
            if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|p| p[0] >= p[1]) {
                return invalid("experiment.values must be finite and strictly increasing");
            }
        }
        if self.sweep == SweepKind::Users && values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return invalid("experiment.values of a users sweep must be positive integers");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub experiment: ExperimentSection,
}

impl RunConfig {
    /// Rejects configurations the solver or the sweep cannot run. Every sweep
    /// point must give a valid system.
    pub fn check(&self) -> Result<(), ConfigError> {
        self.system.to_system()?;
        self.experiment.check()?;
        for v in self.experiment.sweep_values() {
            self.system_at(v)?;
        }
        Ok(())
    }

    /// The system at one sweep point.
    pub fn system_at(&self, value: f64) -> Result<SystemConfig, ConfigError> {
        let mut section = self.system.clone();
        match self.experiment.sweep {
            SweepKind::Power | SweepKind::Convergence => section.power_dbm = value,
            SweepKind::Users => section.users = value as usize,
            SweepKind::Benchmark => {}
        }
        section.to_system()
    }
}

const SECTIONS: [&str; 2] = ["system", "experiment"];

/// Dotted paths of every key in `table` that no section declares.
fn unknown_keys(table: &Table) -> Vec<String> {
    let known = Value::try_from(RunConfig::default()).expect("defaults serialize");
    let known = known.as_table().expect("table");
    let mut out = Vec::new();
    for (section, body) in table {
        let Some(fields) = known.get(section).and_then(Value::as_table) else {
            out.push(section.clone());
            continue;
        };
        let Some(body) = body.as_table() else { continue };
        for (key, value) in body {
            // Optional fields are absent from the serialized defaults.
            let declared = fields.contains_key(key) || (section == "experiment" && OPTIONAL.contains(&key.as_str()));
            if !declared {
                out.push(format!("{section}.{key}"));
            } else if key == "modes" {
                for (i, mode) in value.as_array().into_iter().flatten().enumerate() {
                    for k in mode.as_table().into_iter().flat_map(|t| t.keys()) {
                        if !["access", "antenna", "ris"].contains(&k.as_str()) {
                            out.push(format!("experiment.modes[{i}].{k}"));
                        }
                    }
                }
            }
        }
    }
    out
}

const OPTIONAL: [&str; 2] = ["values", "trace_trials"];

/// Parses `key=value` where the value is TOML (bare words are taken as
/// strings).
pub fn parse_override(raw: &str) -> Result<(String, Value), ConfigError> {
    let (key, value) = raw.split_once('=').ok_or_else(|| ConfigError::Override(raw.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(raw.into()));
    }
    let text = value.trim();
    let value = format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let (section, field) = key.split_once('.').ok_or_else(|| ConfigError::UnknownKeys(vec![key.to_string()]))?;
    if !SECTIONS.contains(&section) {
        return Err(ConfigError::UnknownKeys(vec![key.to_string()]));
    }
    let entry = table.entry(section).or_insert_with(|| Value::Table(Table::new()));
    let body = entry.as_table_mut().ok_or_else(|| ConfigError::Parse(format!("{section} must be a table")))?;
    body.insert(field.to_string(), value);
    Ok(())
}

/// Resolves defaults < `file` < `overrides` (dotted `section.key` paths).
pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig, ConfigError> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
            text.parse::<Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
        }
        None => Table::new(),
    };
    for (key, value) in overrides {
        set_path(&mut table, key, value.clone())?;
    }
    let unknown = unknown_keys(&table);
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let cfg: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    cfg.check()?;
    Ok(cfg)
}
