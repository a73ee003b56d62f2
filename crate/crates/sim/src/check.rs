//! Invariant checks on random instances, for the `check` subcommand.

use rsma_core::channel::{sample_scenario, PositionModel};
use rsma_core::config::SystemConfig;
use rsma_core::fp::{eval_psi, eval_t, sum_psi, update_aux};
use rsma_core::ma::psi_gradient;
use rsma_core::rates::user_rates;
use rsma_core::seed::trial_seed;
use rsma_core::solver::{random_state, solve, AccessMode, SolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<28} worst {:.3e} (tol {:.1e})", self.name, self.worst, self.tolerance)
    }
}

fn result(name: &'static str, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: worst <= tolerance, worst, tolerance }
}

fn instance_config(base: &SystemConfig, i: u64) -> SystemConfig {
    let mut cfg = base.clone().with_users(1 + (i % 3) as usize).with_power_dbm(10.0 + 5.0 * (i % 7) as f64);
    cfg.antennas = 2 + (i % 5) as usize;
    cfg.ris_elements = 4 + (i % 4) as usize;
    cfg.seed = trial_seed(base.seed, i);
    cfg
}

/// Surrogates equal the rates after the auxiliary update.
fn surrogate_tightness(base: &SystemConfig, count: u64) -> Result<CheckResult, rsma_core::Error> {
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let cfg = instance_config(base, i);
        let real = sample_scenario(&cfg)?.normalized(&cfg.noise_power);
        let state = random_state(&cfg, cfg.seed);
        let ch = real.assemble(state.x.as_slice(), &state.phi)?;
        let noise = vec![1.0; cfg.users];
        let aux = update_aux(&state.w, &ch.h, &noise);
        let (private, common) = user_rates(&ch, &state.w, &noise);
        for k in 0..cfg.users {
            let psi = eval_psi(k, &aux, &state.w, &ch.h[k], 1.0).value();
            let t = eval_t(k, &aux, &state.w, &ch.h[k], 1.0);
            worst = worst.max((psi - private[k]).abs() / private[k].max(1.0));
            worst = worst.max((t - common[k]).abs() / common[k].max(1.0));
        }
    }
    Ok(result("surrogate tightness", worst, 1e-9))
}

/// Analytic position gradient against central differences.
fn position_gradient(base: &SystemConfig, count: u64) -> Result<CheckResult, rsma_core::Error> {
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let cfg = instance_config(base, i);
        let real = sample_scenario(&cfg)?.normalized(&cfg.noise_power);
        let state = random_state(&cfg, cfg.seed);
        let model = PositionModel::new(&real, &state.phi)?;
        let x = state.x.as_slice();
        let noise = vec![1.0; cfg.users];
        let aux = update_aux(&state.w, &model.channels(x), &noise);
        let grad = psi_gradient(&aux, &state.w, &model.rows_with_derivs(x));
        let step = 1e-6 * cfg.wavelength;
        let value = |x: &[f64]| sum_psi(&aux, &state.w, &model.channels(x), &noise);
        let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
        for (m, g) in grad.iter().enumerate() {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[m] += step;
            down[m] -= step;
            let fd = (value(&up) - value(&down)) / (2.0 * step);
            worst = worst.max((g - fd).abs() / scale);
        }
    }
    Ok(result("position gradient", worst, 1e-4))
}

/// Full solves in both access modes: constraints and monotone traces.
fn solves(base: &SystemConfig, count: u64) -> Result<Vec<CheckResult>, rsma_core::Error> {
    let mut power: f64 = 0.0;
    let mut modulus: f64 = 0.0;
    let mut layout: f64 = 0.0;
    let mut common: f64 = 0.0;
    let mut drop: f64 = 0.0;
    for i in 0..count {
        let cfg = instance_config(base, i);
        let real = sample_scenario(&cfg)?;
        for mode in [AccessMode::Rsma, AccessMode::Sdma] {
            let opts = SolveOptions { mode, r_max: 20, ..SolveOptions::default() };
            let res = solve(&cfg, &real, &opts)?;
            let r = res.report.residuals;
            power = power.max(r.power_excess / cfg.power);
            modulus = modulus.max(r.unit_modulus);
            layout = layout.max(r.box_excess.max(0.0)).max(r.spacing_deficit.max(0.0) / cfg.wavelength);
            common = common.max(r.common_excess).max(r.negative_common);
            let rates: Vec<f64> = res.trace.iter().map(|e| e.sum_rate).collect();
            for pair in rates.windows(2) {
                drop = drop.max(pair[0] - pair[1]);
            }
        }
    }
    Ok(vec![
        result("power budget", power, 1e-9),
        result("unit modulus", modulus, 1e-12),
        result("antenna layout", layout, 0.0),
        result("common rate split", common, 1e-9),
        result("monotone sum rate", drop, 1e-9),
    ])
}

/// Runs every check on `count` instances derived from `base.seed`.
pub fn run_checks(base: &SystemConfig, count: u64) -> Result<Vec<CheckResult>, rsma_core::Error> {
    let mut out = vec![surrogate_tightness(base, count)?, position_gradient(base, count)?];
    out.extend(solves(base, count.min(8))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass_on_a_few_instances() {
        let results = run_checks(&SystemConfig::default(), 3).unwrap();
        for r in &results {
            assert!(r.passed, "{r}");
        }
    }
}
