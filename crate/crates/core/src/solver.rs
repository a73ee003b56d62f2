//! Outer alternating optimization and its baseline modes.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::beamformer::{solve_beamforming, BeamformerOptions, MultiplierState};
use crate::channel::{AntennaPositions, ChannelRealization, CompositeChannel, PositionModel};
use crate::config::SystemConfig;
use crate::fp::{t_values, update_aux};
use crate::linalg::{cis, CVec, Complex64};
use crate::ma::{optimize_positions, project_layout, CommonCoupling, MaOptions, Region};
use crate::rates::{allocate_common_rate, evaluate, user_rates, BeamformingMatrix, RateReport, Residuals};
use crate::ris::{build_quadratic_forms, dual_ascent_ris, DualState, RisOptions};
use crate::Result;

/// Optimization variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    pub w: BeamformingMatrix,
    pub phi: CVec,
    pub x: AntennaPositions,
    /// Allocated common rates, nats.
    pub r_c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Rsma,
    Sdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AntennaMode {
    Movable,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RisMode {
    Optimized,
    /// Phases frozen at a uniform random draw.
    RandomFixed,
    /// No reflected path.
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub mode: AccessMode,
    pub antenna: AntennaMode,
    pub ris: RisMode,
    pub r_max: usize,
    /// Stop once the sum rate changes by less than this, bit/s/Hz.
    pub eps_outer: f64,
    /// Rounds of auxiliary refresh and block update per outer iteration,
    /// for the beamforming and position blocks.
    pub fp_rounds: usize,
    /// Stop the rounds early once one gains less than this, bit/s/Hz.
    pub fp_tol: f64,
    pub beamformer: BeamformerOptions,
    pub ris_opts: RisOptions,
    /// Position-update options; derived from the wavelength when unset.
    pub ma: Option<MaOptions>,
    /// Seed of the random phases under [`RisMode::RandomFixed`].
    pub phase_seed: u64,
    /// After each outer iteration, try stepping further along the change
    /// made by that iteration; kept only if the sum rate rises.
    pub extrapolate: bool,
    /// Also start RSMA from the SDMA solution; see [`solve_with_clock`].
    pub sdma_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: AccessMode::Rsma,
            antenna: AntennaMode::Movable,
            ris: RisMode::Optimized,
            r_max: 50,
            eps_outer: 1e-3,
            fp_rounds: 100,
            fp_tol: 1e-5,
            beamformer: BeamformerOptions::default(),
            ris_opts: RisOptions::default(),
            ma: None,
            phase_seed: 0,
            extrapolate: true,
            sdma_start: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.r_max == 0 {
            return Err(crate::Error::InvalidConfig("r_max must be at least 1"));
        }
        if self.fp_rounds == 0 {
            return Err(crate::Error::InvalidConfig("fp_rounds must be at least 1"));
        }
        if !(self.fp_tol >= 0.0) {
            return Err(crate::Error::InvalidConfig("fp_tol must be nonnegative"));
        }
        if !(self.eps_outer > 0.0) {
            return Err(crate::Error::InvalidConfig("eps_outer must be positive"));
        }
        Ok(())
    }
}

/// Time source for block timings. The default reports nothing.
pub trait Clock {
    /// Seconds since an arbitrary origin.
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Wall time per block, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BlockTimings {
    pub aux: f64,
    pub beamformer: f64,
    pub ris: f64,
    pub positions: f64,
}

/// Irregular block outcomes of one outer iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockFlags {
    /// The multiplier iteration hit its cap.
    pub beamformer_capped: bool,
    /// The beamforming block kept its entry point.
    pub beamformer_kept_entry: bool,
    /// The beamforming system was singular; the previous beamformers were kept.
    pub beamformer_failed: bool,
    pub ris_capped: bool,
    /// The RIS block found no iterate within the violation tolerance.
    pub ris_infeasible: bool,
    pub positions_stalled: bool,
    pub positions_capped: bool,
    /// Blocks whose result lowered the sum rate and was undone.
    pub reverted_beamformer: bool,
    pub reverted_ris: bool,
    pub reverted_positions: bool,
    /// The extrapolated point was accepted.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Sum rate after the iteration, bit/s/Hz.
    pub sum_rate: f64,
    /// Common surrogates `T_k` at the end of the iteration, nats.
    pub t_values: Vec<f64>,
    pub power: f64,
    pub residuals: Residuals,
    pub timings: BlockTimings,
    pub flags: BlockFlags,
}

impl TraceEntry {
    pub fn min_t(&self) -> f64 {
        self.t_values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub report: RateReport,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    pub state: DecisionState,
    pub multipliers: MultiplierState,
    pub dual: DualState,
    /// Sum rate of the starting point, bit/s/Hz.
    pub initial_sum_rate: f64,
}

fn unit_noise(users: usize) -> Vec<f64> {
    alloc::vec![1.0; users]
}

fn effective_realization(real: &ChannelRealization, cfg: &SystemConfig, opts: &SolveOptions) -> ChannelRealization {
    let normalized = real.normalized(&cfg.noise_power);
    match opts.ris {
        RisMode::Absent => normalized.without_ris(),
        _ => normalized,
    }
}

/// Uniform random unit-modulus phases.
pub fn random_phases(n: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVec::from_fn(n, |_, _| cis(rng.gen_range(0.0..2.0 * PI)))
}

/// A random feasible point: sorted positions with uniform slack, uniform
/// phases and beamformer entries uniform in the unit square, scaled to the
/// full budget. Used to probe invariants away from the solver's path.
pub fn random_state(cfg: &SystemConfig, seed: u64) -> DecisionState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.antennas;
    let slack = cfg.x_max - cfg.x_min - (m - 1) as f64 * cfg.min_spacing;
    let mut z: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * slack).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let raw: Vec<f64> = z.iter().enumerate().map(|(i, zi)| cfg.x_min + zi + i as f64 * cfg.min_spacing).collect();
    let region = Region { x_min: cfg.x_min, x_max: cfg.x_max, min_spacing: cfg.min_spacing };
    // Rounding can shave a gap below D0; the projection restores it.
    let x = crate::ma::project_layout(&raw, &(0..m).collect::<Vec<_>>(), &region);
    let phi = CVec::from_fn(cfg.ris_elements, |_, _| cis(rng.gen_range(0.0..2.0 * PI)));
    let mut w = BeamformingMatrix(crate::CMat::from_fn(m, cfg.users + 1, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    }));
    let used = w.power();
    if used > 0.0 {
        w.scale((cfg.power / used).sqrt());
    }
    DecisionState { w, phi, x, r_c: alloc::vec![0.0; cfg.users] }
}

fn matched_filters(hs: &[CVec], antennas: usize, power: f64, common: bool) -> BeamformingMatrix {
    let users = hs.len();
    let streams = if common { users + 1 } else { users };
    let per_stream = (power / streams as f64).sqrt();
    let mut w = BeamformingMatrix::zeros(antennas, users);
    let unit = |v: &CVec| {
        let n = v.norm();
        if n > 0.0 {
            Some(v.unscale(n) * Complex64::new(per_stream, 0.0))
        } else {
            None
        }
    };
    for (k, h) in hs.iter().enumerate() {
        if let Some(col) = unit(h) {
            w.0.column_mut(k).copy_from(&col);
        }
    }
    if common {
        let sum = hs.iter().fold(CVec::zeros(antennas), |acc, h| acc + h);
        if let Some(col) = unit(&sum) {
            w.0.column_mut(users).copy_from(&col);
        }
    }
    // Columns lost to zero channels leave power unused; restore the budget.
    let used = w.power();
    if used > 0.0 {
        w.scale((power / used).sqrt());
    }
    w
}

/// Starting point: equally spaced antennas, all-ones phases, matched-filter
/// beamformers with the budget split evenly over the streams, no common rate.
pub fn default_state(cfg: &SystemConfig, real: &ChannelRealization, opts: &SolveOptions) -> Result<DecisionState> {
    let eff = effective_realization(real, cfg, opts);
    let x = AntennaPositions::equally_spaced(cfg);
    let phi = match opts.ris {
        RisMode::RandomFixed => random_phases(cfg.ris_elements, opts.phase_seed),
        _ => CVec::from_element(cfg.ris_elements, Complex64::new(1.0, 0.0)),
    };
    let ch = eff.assemble(x.as_slice(), &phi)?;
    let w = matched_filters(&ch.h, cfg.antennas, cfg.power, opts.mode == AccessMode::Rsma);
    Ok(DecisionState { w, phi, x, r_c: alloc::vec![0.0; cfg.users] })
}

/// Equal split of the weakest decodable common rate; zero without a common
/// stream.
fn common_split(ch: &CompositeChannel, w: &BeamformingMatrix, noise: &[f64], mode: AccessMode) -> Vec<f64> {
    let users = w.users();
    match mode {
        AccessMode::Sdma => alloc::vec![0.0; users],
        AccessMode::Rsma => allocate_common_rate(&user_rates(ch, w, noise).1),
    }
}

/// `cur + β (cur - prev)` in every variable, pulled back onto the power
/// budget, the unit circle and the feasible layouts. Frozen blocks have
/// `cur == prev` and stay put.
fn extrapolated(prev: &DecisionState, cur: &DecisionState, beta: f64, power: f64, region: &Region) -> DecisionState {
    let mut w = BeamformingMatrix(&cur.w.0 + (&cur.w.0 - &prev.w.0) * Complex64::new(beta, 0.0));
    let p = w.power();
    if p > power {
        w.scale((power / p).sqrt());
    }
    let phi = cur.phi.zip_map(&prev.phi, |c, old| {
        let z = c + (c - old) * beta;
        let n = z.norm();
        if c == old || n == 0.0 {
            c
        } else {
            z / n
        }
    });
    let stepped: Vec<f64> = cur.x.0.iter().zip(&prev.x.0).map(|(c, old)| c + beta * (c - old)).collect();
    let mut order: Vec<usize> = (0..stepped.len()).collect();
    order.sort_by(|&a, &b| cur.x.0[a].total_cmp(&cur.x.0[b]));
    let x = if stepped == cur.x.0 { cur.x.clone() } else { project_layout(&stepped, &order, region) };
    DecisionState { w, phi, x, r_c: cur.r_c.clone() }
}

const EXTRAPOLATION_TRIES: usize = 4;
const MIN_EXTRAPOLATION: f64 = 1.0 / 16.0;
const MAX_EXTRAPOLATION: f64 = 8.0;

/// Sum rate in bits with the common split refreshed for `ch`.
fn score(state: &mut DecisionState, ch: &CompositeChannel, noise: &[f64], cfg: &SystemConfig, mode: AccessMode) -> RateReport {
    state.r_c = common_split(ch, &state.w, noise, mode);
    evaluate(state, ch, noise, cfg)
}

pub fn solve(cfg: &SystemConfig, real: &ChannelRealization, opts: &SolveOptions) -> Result<SolveResult> {
    solve_with_clock(cfg, real, opts, &NoClock)
}

/// Alternating optimization. Each outer iteration refreshes the auxiliaries,
/// runs the beamforming block (multipliers, then beamformers), splits the
/// common rate, updates the RIS phases and finally the antenna positions.
///
/// Blocks that stall or hit their caps are flagged in the trace. A block
/// whose result lowers the sum rate, with the common split refreshed, is
/// undone.
///
/// With [`SolveOptions::sdma_start`], an RSMA solve also runs the SDMA
/// problem and resumes RSMA from its solution, keeping the better of the
/// two runs. The trace of a resumed run starts with the SDMA iterations.
pub fn solve_with_clock(
    cfg: &SystemConfig,
    real: &ChannelRealization,
    opts: &SolveOptions,
    clock: &dyn Clock,
) -> Result<SolveResult> {
    cfg.validate()?;
    opts.validate()?;
    real.check_dimensions(cfg)?;

    let eff = effective_realization(real, cfg, opts);
    let direct = alternate(cfg, &eff, opts, default_state(cfg, real, opts)?, clock)?;
    if opts.mode == AccessMode::Sdma || !opts.sdma_start {
        return Ok(direct);
    }
    let sdma_opts = SolveOptions { mode: AccessMode::Sdma, ..*opts };
    let first = alternate(cfg, &eff, &sdma_opts, default_state(cfg, real, &sdma_opts)?, clock)?;
    let mut resumed = alternate(cfg, &eff, opts, first.state.clone(), clock)?;
    if !(resumed.report.sum_rate > direct.report.sum_rate) {
        return Ok(direct);
    }
    let offset = first.trace.len();
    let mut trace = first.trace;
    trace.extend(resumed.trace.into_iter().map(|e| TraceEntry { iteration: e.iteration + offset, ..e }));
    resumed.iterations = trace.len();
    resumed.trace = trace;
    resumed.initial_sum_rate = first.initial_sum_rate;
    Ok(resumed)
}

/// The outer loop from `state`, over the noise-normalized realization `eff`.
fn alternate(
    cfg: &SystemConfig,
    eff: &ChannelRealization,
    opts: &SolveOptions,
    mut state: DecisionState,
    clock: &dyn Clock,
) -> Result<SolveResult> {
    let noise = unit_noise(cfg.users);
    let rsma = opts.mode == AccessMode::Rsma;
    let ma_opts = opts.ma.unwrap_or_else(|| MaOptions::for_wavelength(cfg.wavelength));
    let region = Region { x_min: cfg.x_min, x_max: cfg.x_max, min_spacing: cfg.min_spacing };

    let mut ch = eff.assemble(state.x.as_slice(), &state.phi)?;
    let mut report = score(&mut state, &ch, &noise, cfg, opts.mode);
    let initial_sum_rate = report.sum_rate;
    let mut mult = MultiplierState::new(cfg.users);
    let mut dual = DualState::new(cfg.users, opts.ris_opts.tau);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut beta = 1.0;

    for iteration in 1..=opts.r_max {
        let previous = report.sum_rate;
        let start_state = state.clone();
        let mut timings = BlockTimings::default();
        let mut flags = BlockFlags::default();

        let t0 = clock.now();
        for _ in 0..opts.fp_rounds {
            let start = clock.now();
            let aux = update_aux(&state.w, &ch.h, &noise);
            timings.aux += clock.now() - start;
            let entry = report.sum_rate;
            match solve_beamforming(&aux, &ch.h, &noise, cfg.power, &state.w, &mult, rsma, &opts.beamformer) {
                Ok(out) => {
                    flags.beamformer_capped |= !out.converged;
                    flags.beamformer_kept_entry |= out.kept_entry;
                    let before = state.clone();
                    state.w = out.w;
                    let candidate = score(&mut state, &ch, &noise, cfg, opts.mode);
                    mult = out.multipliers;
                    if candidate.sum_rate < report.sum_rate {
                        state = before;
                        flags.reverted_beamformer = true;
                        break;
                    }
                    report = candidate;
                }
                Err(_) => {
                    flags.beamformer_failed = true;
                    break;
                }
            }
            if report.sum_rate - entry < opts.fp_tol {
                break;
            }
        }
        state.r_c = common_split(&ch, &state.w, &noise, opts.mode);
        let t2 = clock.now();
        timings.beamformer = (t2 - t0) - timings.aux;

        if opts.ris == RisMode::Optimized && cfg.ris_elements > 0 {
            let aux = update_aux(&state.w, &ch.h, &noise);
            let forms = build_quadratic_forms(&aux, &state.w, &ch, &noise);
            let s: f64 = state.r_c.iter().sum();
            let out = dual_ascent_ris(&forms, s, &state.phi, &dual, &opts.ris_opts);
            flags.ris_capped = !out.converged;
            flags.ris_infeasible = out.max_violation > opts.ris_opts.violation_tol;
            dual = out.dual;
            let next_ch = eff.assemble(state.x.as_slice(), &out.phi)?;
            let mut candidate_state = DecisionState { phi: out.phi, ..state.clone() };
            let candidate = score(&mut candidate_state, &next_ch, &noise, cfg, opts.mode);
            if candidate.sum_rate < report.sum_rate {
                flags.reverted_ris = true;
            } else {
                state = candidate_state;
                ch = next_ch;
                report = candidate;
            }
        }
        let t3 = clock.now();
        timings.ris = t3 - t2;

        if opts.antenna == AntennaMode::Movable {
            let model = PositionModel::new(&eff, &state.phi)?;
            for _ in 0..opts.fp_rounds {
                let entry = report.sum_rate;
                let aux = update_aux(&state.w, &ch.h, &noise);
                let coupling = if rsma { CommonCoupling::Weighted(&mult.lambda) } else { CommonCoupling::None };
                let out = optimize_positions(&state.x, &aux, &state.w, &model, &noise, &region, coupling, &ma_opts);
                flags.positions_stalled |= out.stalled;
                flags.positions_capped |= !out.converged && !out.stalled;
                let next_ch = eff.assemble(out.x.as_slice(), &state.phi)?;
                let mut candidate_state = DecisionState { x: out.x, ..state.clone() };
                let candidate = score(&mut candidate_state, &next_ch, &noise, cfg, opts.mode);
                if candidate.sum_rate < report.sum_rate {
                    flags.reverted_positions = true;
                    break;
                }
                state = candidate_state;
                ch = next_ch;
                report = candidate;
                if report.sum_rate - entry < opts.fp_tol {
                    break;
                }
            }
        }
        timings.positions = clock.now() - t3;

        if opts.extrapolate && iteration > 1 {
            // Doubles the step while the sum rate keeps rising.
            let base = state.clone();
            let mut step = beta;
            let mut accepted = None;
            for _ in 0..EXTRAPOLATION_TRIES {
                let mut cand = extrapolated(&start_state, &base, step, cfg.power, &region);
                let cand_ch = eff.assemble(cand.x.as_slice(), &cand.phi)?;
                let cand_report = score(&mut cand, &cand_ch, &noise, cfg, opts.mode);
                if !(cand_report.sum_rate > report.sum_rate) {
                    break;
                }
                state = cand;
                ch = cand_ch;
                report = cand_report;
                accepted = Some(step);
                step *= 2.0;
            }
            flags.extrapolated = accepted.is_some();
            beta = accepted.map_or((0.5 * beta).max(MIN_EXTRAPOLATION), |b| b.min(MAX_EXTRAPOLATION));
        }

        report = score(&mut state, &ch, &noise, cfg, opts.mode);
        let aux = update_aux(&state.w, &ch.h, &noise);
        let t = if rsma { t_values(&aux, &state.w, &ch.h, &noise) } else { alloc::vec![0.0; cfg.users] };
        trace.push(TraceEntry {
            iteration,
            sum_rate: report.sum_rate,
            t_values: t,
            power: state.w.power(),
            residuals: report.residuals,
            timings,
            flags,
        });
        if (report.sum_rate - previous).abs() < opts.eps_outer {
            converged = true;
            break;
        }
    }

    let iterations = trace.len();
    Ok(SolveResult { report, trace, converged, iterations, state, multipliers: mult, dual, initial_sum_rate })
}
