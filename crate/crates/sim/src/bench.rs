//! Timing of the antenna-position gradient across array and user counts.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rsma_core::channel::{sample_scenario, PositionModel};
use rsma_core::config::SystemConfig;
use rsma_core::fp::update_aux;
use rsma_core::ma::{psi_gradient, t_gradient};
use rsma_core::solver::random_state;

pub const ANTENNAS: [usize; 3] = [4, 8, 16];
pub const USERS: [usize; 3] = [2, 4, 8];

/// The report flags a fitted antenna exponent above this.
pub const EXPONENT_LIMIT: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub antennas: usize,
    pub users: usize,
    /// Mean time of one full gradient (private and common parts).
    pub micros: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Slopes of `log t` against `log M` and `log K`.
    pub antenna_exponent: f64,
    pub user_exponent: f64,
}

impl BenchReport {
    pub fn flagged(&self) -> bool {
        self.antenna_exponent > EXPONENT_LIMIT
    }
}

fn time_gradient(base: &SystemConfig, antennas: usize, users: usize, budget: Duration) -> Result<f64, rsma_core::Error> {
    let mut cfg = base.clone().with_users(users);
    cfg.antennas = antennas;
    let real = sample_scenario(&cfg)?.normalized(&cfg.noise_power);
    let state = random_state(&cfg, cfg.seed);
    let model = PositionModel::new(&real, &state.phi)?;
    let x = state.x.as_slice();
    let noise = vec![1.0; users];
    let aux = update_aux(&state.w, &model.channels(x), &noise);
    let once = || {
        let rows = model.rows_with_derivs(black_box(x));
        let mut g = psi_gradient(&aux, &state.w, &rows);
        for k in 0..users {
            for (a, b) in g.iter_mut().zip(t_gradient(k, &aux, &state.w, &rows)) {
                *a += b;
            }
        }
        black_box(g);
    };
    once();
    let start = Instant::now();
    let mut reps = 0u32;
    while reps < 3 || start.elapsed() < budget {
        once();
        reps += 1;
    }
    Ok(start.elapsed().as_secs_f64() * 1e6 / reps as f64)
}

/// Least-squares slope of `y` on `x`.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Times every (M, K) pair for roughly `budget` each. On the full factorial
/// grid the centered log-dimensions are orthogonal, so the two-factor
/// log-log fit reduces to separate slopes.
pub fn run_benchmark(base: &SystemConfig, budget: Duration) -> Result<BenchReport, rsma_core::Error> {
    let mut rows = Vec::new();
    for &antennas in &ANTENNAS {
        for &users in &USERS {
            let micros = time_gradient(base, antennas, users, budget)?;
            log::info!("M={antennas} K={users}: {micros:.2} us");
            rows.push(BenchRow { antennas, users, micros });
        }
    }
    let logs = |f: fn(&BenchRow) -> usize| -> Vec<(f64, f64)> {
        rows.iter().map(|r| ((f(r) as f64).ln(), r.micros.ln())).collect()
    };
    let antenna_exponent = slope(&logs(|r| r.antennas));
    let user_exponent = slope(&logs(|r| r.users));
    Ok(BenchReport { rows, antenna_exponent, user_exponent })
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>4} {:>4} {:>14} {:>10} {:>10}", "M", "K", "gradient_us", "x2M_ratio", "x2K_ratio")?;
        let find = |m: usize, k: usize| self.rows.iter().find(|r| r.antennas == m && r.users == k).map(|r| r.micros);
        let ratio = |num: Option<f64>, den: f64| num.map(|n| format!("{:.2}", n / den)).unwrap_or_else(|| "-".into());
        for r in &self.rows {
            let by_m = ratio(find(2 * r.antennas, r.users), r.micros);
            let by_k = ratio(find(r.antennas, 2 * r.users), r.micros);
            writeln!(f, "{:>4} {:>4} {:>14.3} {:>10} {:>10}", r.antennas, r.users, r.micros, by_m, by_k)?;
        }
        writeln!(f, "fitted exponents: M^{:.2} K^{:.2}", self.antenna_exponent, self.user_exponent)?;
        if self.flagged() {
            writeln!(f, "WARNING: antenna exponent exceeds {EXPONENT_LIMIT}")?;
        }
        Ok(())
    }
}
