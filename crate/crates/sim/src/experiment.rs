//! Seeded Monte Carlo sweeps and their CSV outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rsma_core::channel::sample_scenario;
use rsma_core::rates::Residuals;
use rsma_core::seed::{splitmix64, trial_seed};
use rsma_core::solver::{solve, SolveOptions};
use serde::Serialize;

use crate::config::{label, ModeSpec, RunConfig, SweepKind};

/// One solver iteration as written to `trace_<id>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub sum_rate: f64,
    pub min_t: f64,
    pub power: f64,
}

/// Outcome of one (sweep point, mode, trial) solve.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub sweep_param: f64,
    pub mode: ModeSpec,
    pub trial: usize,
    pub seed: u64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: Option<f64>,
    pub power_budget: f64,
    pub residuals: Residuals,
    /// Largest `||φ_i| - 1|`.
    pub unit_modulus: f64,
    /// Box and spacing constraints, checked without tolerance.
    pub layout_feasible: bool,
    pub multipliers: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub trace_id: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("solver failed at {what}: {source}")]
    Solver { what: String, source: rsma_core::Error },
    #[error("benchmark sweeps are run by `bench`")]
    Benchmark,
}

/// Rates and residuals as text: 17 significant digits, '.' separator.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |source| RunError::Csv { path: path.to_path_buf(), source }
}

struct Job {
    value: f64,
    mode: ModeSpec,
    trial: usize,
}

fn run_job(cfg: &RunConfig, job: &Job) -> Result<TrialRecord, RunError> {
    let exp = &cfg.experiment;
    let seed = trial_seed(cfg.system.seed, job.trial as u64);
    let system = cfg.system_at(job.value)?;
    let system = rsma_core::config::SystemConfig { seed, ..system };
    let what = || format!("{} {} trial {}", job.value, job.mode, job.trial);
    let real = sample_scenario(&system).map_err(|source| RunError::Solver { what: what(), source })?;
    let (mode, antenna, ris) = job.mode.solver_modes();
    let opts = SolveOptions {
        mode,
        antenna,
        ris,
        r_max: exp.r_max,
        eps_outer: exp.eps_outer,
        phase_seed: splitmix64(seed),
        ..SolveOptions::default()
    };
    let start = Instant::now();
    let res = solve(&system, &real, &opts).map_err(|source| RunError::Solver { what: what(), source })?;
    let wall_ms = exp.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    let traced = job.trial < exp.traced_trials();
    let trace = res
        .trace
        .iter()
        .map(|e| TracePoint { iteration: e.iteration, sum_rate: e.sum_rate, min_t: e.min_t(), power: e.power })
        .collect();
    Ok(TrialRecord {
        sweep_param: job.value,
        mode: job.mode,
        trial: job.trial,
        seed,
        sum_rate: res.report.sum_rate,
        iterations: res.iterations,
        converged: res.converged,
        wall_ms,
        power_budget: system.power,
        residuals: res.report.residuals,
        unit_modulus: res.state.phi.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max),
        layout_feasible: res.state.x.is_feasible(system.x_min, system.x_max, system.min_spacing),
        multipliers: res.multipliers.lambda.clone(),
        trace,
        trace_id: traced.then(|| exp.trace_id(job.value, job.mode, job.trial)),
    })
}

/// Solves every (sweep point, mode, trial) in parallel. Records come back in
/// that nested order whatever the completion order.
pub fn solve_all(cfg: &RunConfig) -> Result<Vec<TrialRecord>, RunError> {
    let exp = &cfg.experiment;
    if exp.sweep == SweepKind::Benchmark {
        return Err(RunError::Benchmark);
    }
    cfg.check()?;
    let mut jobs = Vec::new();
    for value in exp.sweep_values() {
        for &mode in &exp.modes {
            for trial in 0..exp.trials {
                jobs.push(Job { value, mode, trial });
            }
        }
    }
    log::info!("{} solves over {} sweep points", jobs.len(), exp.sweep_values().len());
    jobs.par_iter().map(|job| run_job(cfg, job)).collect()
}

#[derive(Serialize)]
struct Build {
    version: &'static str,
    git: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    build: Build,
    #[serde(flatten)]
    config: &'a RunConfig,
}

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn git_describe() -> &'static str {
    option_env!("RSMA_SIM_GIT_DESCRIBE").unwrap_or("unknown")
}

/// The resolved configuration with build identification, as TOML.
pub fn manifest(cfg: &RunConfig) -> String {
    let mut resolved = cfg.clone();
    resolved.experiment.values = Some(cfg.experiment.sweep_values());
    resolved.experiment.trace_trials = Some(cfg.experiment.traced_trials());
    let m = Manifest { build: Build { version: version(), git: git_describe() }, config: &resolved };
    toml::to_string(&m).expect("manifest serializes")
}

const SUMMARY_HEADER: [&str; 10] =
    ["sweep_param", "mode", "antenna", "ris", "trial", "seed", "sum_rate_bpshz", "iterations", "converged", "wall_ms"];

fn write_summary(path: &Path, records: &[TrialRecord]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.sweep_param.to_string(),
            label(r.mode.access),
            label(r.mode.antenna),
            label(r.mode.ris),
            r.trial.to_string(),
            r.seed.to_string(),
            num(r.sum_rate),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.wall_ms.map(|t| format!("{t:.3}")).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["iter", "sum_rate_bpshz", "min_Tk", "power_used"]).map_err(csv_err(path))?;
    for p in trace {
        w.write_record([p.iteration.to_string(), num(p.sum_rate), num(p.min_t), num(p.power)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Runs the sweep and writes `summary.csv`, the requested traces and
/// `manifest.toml` under the configured output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<TrialRecord>, RunError> {
    let records = solve_all(cfg)?;
    let out = &cfg.experiment.out;
    fs::create_dir_all(out).map_err(io(out))?;
    write_summary(&out.join("summary.csv"), &records)?;
    for r in &records {
        if let Some(id) = &r.trace_id {
            write_trace(&out.join(format!("trace_{id}.csv")), &r.trace)?;
        }
    }
    let path = out.join("manifest.toml");
    fs::write(&path, manifest(cfg)).map_err(io(&path))?;
    Ok(records)
}

/// Mean sum rate per (sweep point, mode), in first-seen order.
pub fn means(records: &[TrialRecord]) -> Vec<(f64, ModeSpec, f64)> {
    let mut out: Vec<(f64, ModeSpec, f64, usize)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|e| e.0 == r.sweep_param && e.1 == r.mode) {
            Some(e) => {
                e.2 += r.sum_rate;
                e.3 += 1;
            }
            None => out.push((r.sweep_param, r.mode, r.sum_rate, 1)),
        }
    }
    out.into_iter().map(|(v, m, s, n)| (v, m, s / n as f64)).collect()
}
