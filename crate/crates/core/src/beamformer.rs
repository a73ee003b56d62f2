//! Beamforming block: maximize `Σ_k Ψ_k(W) + y` subject to `T_k(W) ≥ y` and
//! `tr(W^H W) ≤ P_T` for fixed auxiliaries.
//!
//! For given multipliers `(λ, κ)` the stationarity conditions give every
//! beamformer in closed form. The multipliers follow a multiplicative
//! fixed-point iteration whose fixed points satisfy complementary slackness:
//! `λ_k > 0` only for users attaining `min_k T_k`, and `tr(W^H W) = P_T`
//! whenever `κ > 0`.

use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::fp::{sum_psi, t_values, AuxiliaryState};
use crate::linalg::{add_outer, hermitize, CMat, CVec, Complex64};
use crate::rates::BeamformingMatrix;
use crate::{Error, Result};

const KAPPA_FLOOR: f64 = 1e-12;

/// Lagrange multipliers of the beamforming block.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    /// Weights of the common-rate constraints; a point of the unit simplex.
    pub lambda: Vec<f64>,
    /// Multiplier of the power budget.
    pub kappa: f64,
    /// Damping constant used by the most recent update.
    pub rho: f64,
}

impl MultiplierState {
    /// Uniform weights and `κ = 1`.
    pub fn new(users: usize) -> Self {
        MultiplierState {
            lambda: alloc::vec![1.0 / users as f64; users],
            kappa: 1.0,
            rho: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamformerOptions {
    /// Offset added to `max(0, -min_k T_k)` to form the damping `ρ`.
    pub rho_offset: f64,
    /// Damping of the power multiplier as a multiple of `P_T`.
    pub kappa_damping: f64,
    /// Stop once the duality gap of the block falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BeamformerOptions {
    fn default() -> Self {
        BeamformerOptions { rho_offset: 0.1, kappa_damping: 1.0, tol: 1e-6, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct BeamformingOutcome {
    pub w: BeamformingMatrix,
    pub multipliers: MultiplierState,
    /// `min_k T_k` at the returned beamformers (zero without a common stream).
    pub y: f64,
    /// Block objective at the returned beamformers.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The entry beamformers were kept because the iteration did not improve
    /// on them.
    pub kept_entry: bool,
}

fn solve_hermitian(a: CMat, rhs: CMat, block: &'static str) -> Result<CMat> {
    let chol = a.cholesky().ok_or(Error::SingularSystem { block })?;
    Ok(chol.solve(&rhs))
}

/// Gram matrix (without `κ I`) and right-hand sides of one stationarity
/// system.
struct KktSystem {
    gram: CMat,
    rhs: CMat,
}

fn kkt_systems(aux: &AuxiliaryState, lambda: &[f64], hs: &[CVec], common: bool) -> (KktSystem, Option<KktSystem>) {
    let users = hs.len();
    let m = hs.first().map_or(0, |h| h.len());
    let mut private = KktSystem {
        gram: CMat::zeros(m, m),
        rhs: CMat::from_fn(m, users, |i, k| hs[k][i] * aux.eps[k] * (1.0 + aux.mu[k]).sqrt()),
    };
    let mut shared = KktSystem { gram: CMat::zeros(m, m), rhs: CMat::zeros(m, 1) };
    for (k, h) in hs.iter().enumerate() {
        let lv = if common { lambda[k] * aux.v[k].norm_sqr() } else { 0.0 };
        add_outer(&mut private.gram, h, aux.eps[k].norm_sqr() + lv);
        if common {
            add_outer(&mut shared.gram, h, lv);
            let scale = aux.v[k] * (lambda[k] * (1.0 + aux.gamma[k]).sqrt());
            for i in 0..m {
                shared.rhs[(i, 0)] += h[i] * scale;
            }
        }
    }
    (private, common.then_some(shared))
}

/// Closed-form beamformers for fixed auxiliaries and multipliers.
///
/// The private beamformers share one factorization of
/// `Σ_k (|ε_k|² + λ_k |v_k|²) h_k h_k^H + κ I`. With `common = false` the
/// common column is zero.
pub fn kkt_beamformers(
    aux: &AuxiliaryState,
    mult: &MultiplierState,
    hs: &[CVec],
    common: bool,
) -> Result<BeamformingMatrix> {
    let users = hs.len();
    let m = hs.first().map_or(0, |h| h.len());
    let shift = CMat::identity(m, m) * Complex64::new(mult.kappa, 0.0);
    let (private, shared) = kkt_systems(aux, &mult.lambda, hs, common);

    let mut w = BeamformingMatrix::zeros(m, users);
    let cols = solve_hermitian(private.gram + &shift, private.rhs, "private")?;
    w.0.columns_mut(0, users).copy_from(&cols);
    if let Some(sys) = shared {
        let wc = solve_hermitian(sys.gram + shift, sys.rhs, "common")?;
        w.0.column_mut(users).copy_from(&wc.column(0));
    }
    Ok(w)
}

/// Eigenvalues `s_i` of a Gram matrix and the right-hand-side energy `c_i`
/// along each eigenvector, so that the solution power at shift `κ` is
/// `Σ_i c_i / (s_i + κ)²`.
struct Spectrum {
    s: Vec<f64>,
    c: Vec<f64>,
}

impl Spectrum {
    fn of(sys: &KktSystem) -> Self {
        let eig = hermitize(&sys.gram).symmetric_eigen();
        let proj = eig.eigenvectors.adjoint() * &sys.rhs;
        let c = proj.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();
        Spectrum { s: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(), c }
    }

    fn power(&self, kappa: f64) -> f64 {
        self.s.iter().zip(&self.c).map(|(s, c)| c / ((s + kappa) * (s + kappa))).sum()
    }

    fn slope(&self, kappa: f64) -> f64 {
        self.s.iter().zip(&self.c).map(|(s, c)| -2.0 * c / ((s + kappa) * (s + kappa) * (s + kappa))).sum()
    }
}

/// Power multiplier meeting the budget with equality for the given `λ`, or
/// the floor (flagged `true`) when even a vanishing multiplier leaves power
/// unused.
///
/// Newton's method on `1/sqrt(p(κ)) - 1/sqrt(P)`, which is close to linear in
/// `κ`, safeguarded by bisection.
pub fn power_multiplier(
    aux: &AuxiliaryState,
    lambda: &[f64],
    hs: &[CVec],
    common: bool,
    budget: f64,
    guess: f64,
) -> (f64, bool) {
    let (private, shared) = kkt_systems(aux, lambda, hs, common);
    let spectra: Vec<Spectrum> = core::iter::once(Spectrum::of(&private)).chain(shared.as_ref().map(Spectrum::of)).collect();
    let power = |k: f64| spectra.iter().map(|s| s.power(k)).sum::<f64>();
    let slope = |k: f64| spectra.iter().map(|s| s.slope(k)).sum::<f64>();

    let scale = spectra.iter().flat_map(|s| s.s.iter()).copied().fold(0.0, f64::max).max(1.0);
    let floor = KAPPA_FLOOR * scale;
    if power(floor) <= budget {
        return (floor, true);
    }
    let mut lo = floor;
    let mut hi = guess.max(floor);
    while power(hi) > budget {
        lo = hi;
        hi *= 10.0;
    }
    let target = 1.0 / budget.sqrt();
    let mut kappa = if guess > lo && guess < hi { guess } else { hi };
    for _ in 0..100 {
        let p = power(kappa);
        if (p - budget).abs() <= 1e-13 * budget {
            break;
        }
        if p > budget {
            lo = kappa;
        } else {
            hi = kappa;
        }
        // d/dκ p^{-1/2} = -p'/(2 p^{3/2})
        let phi = 1.0 / p.sqrt() - target;
        let dphi = -slope(kappa) / (2.0 * p * p.sqrt());
        let next = kappa - phi / dphi;
        kappa = if next > lo && next < hi && dphi > 0.0 { next } else { (lo * hi).sqrt() };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    (kappa, false)
}

/// `y = min_k T_k` and the index attaining it (smallest index on ties).
pub fn update_y(t: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (k, &v) in t.iter().enumerate() {
        if v < best.0 {
            best = (v, k);
        }
    }
    best
}

/// One multiplicative update of `(λ, κ)`.
///
/// `λ_k ← λ_k (T_w + ρ)/(T_k + ρ)` for every user but the weakest one `w`,
/// which absorbs the released weight so the simplex is preserved.
/// `κ ← κ (tr(W W^H) + ρ_κ)/(P_T + ρ_κ)`.
pub fn update_multipliers(
    mult: &MultiplierState,
    t: &[f64],
    power: f64,
    budget: f64,
    opts: &BeamformerOptions,
) -> MultiplierState {
    let (t_min, weakest) = update_y(t);
    let rho = (-t_min).max(0.0) + opts.rho_offset;
    let mut lambda = mult.lambda.clone();
    let mut others = 0.0;
    let mut moved = false;
    for (k, l) in lambda.iter_mut().enumerate() {
        if k != weakest {
            let ratio = (t_min + rho) / (t[k] + rho);
            moved |= ratio != 1.0;
            *l *= ratio;
            others += *l;
        }
    }
    if moved {
        lambda[weakest] = (1.0 - others).max(0.0);
    }

    let rho_kappa = opts.kappa_damping * budget;
    let kappa = (mult.kappa * (power + rho_kappa) / (budget + rho_kappa)).max(KAPPA_FLOOR);
    MultiplierState { lambda, kappa, rho }
}

/// Block objective `Σ_k Ψ_k(W) + min_k T_k(W)`; without a common stream only
/// the private part.
pub fn block_objective(aux: &AuxiliaryState, w: &BeamformingMatrix, hs: &[CVec], noise: &[f64], common: bool) -> f64 {
    let psi = sum_psi(aux, w, hs, noise);
    if common {
        psi + update_y(&t_values(aux, w, hs, noise)).0
    } else {
        psi
    }
}

/// Beamformers, surrogates and dual value at one multiplier point.
struct DualPoint {
    mult: MultiplierState,
    w: BeamformingMatrix,
    t: Vec<f64>,
    /// Dual function `Σ_k Ψ_k + Σ_k λ_k T_k + κ (P - tr)`.
    value: f64,
}

fn dual_point(
    aux: &AuxiliaryState,
    lambda: Vec<f64>,
    kappa_guess: f64,
    hs: &[CVec],
    noise: &[f64],
    budget: f64,
    common: bool,
) -> Result<DualPoint> {
    let (kappa, _) = power_multiplier(aux, &lambda, hs, common, budget, kappa_guess);
    let mult = MultiplierState { lambda, kappa, rho: 0.0 };
    let w = kkt_beamformers(aux, &mult, hs, common)?;
    let t = if common { t_values(aux, &w, hs, noise) } else { alloc::vec![0.0; hs.len()] };
    let value = sum_psi(aux, &w, hs, noise)
        + mult.lambda.iter().zip(&t).map(|(l, tk)| l * tk).sum::<f64>()
        + kappa * (budget - w.power());
    Ok(DualPoint { mult, w, t, value })
}

/// Solves the beamforming block for fixed auxiliaries.
///
/// For each `λ` the power multiplier is set so the budget is met, and the
/// beamformers follow in closed form. `λ` moves along the direction of
/// [`update_multipliers`] with a backtracking step on the dual function,
/// until the duality gap `Σ_k λ_k (T_k - min_j T_j)` drops below `opts.tol`.
///
/// The result never uses more than `budget` and never scores below `entry`
/// on the block objective.
#[allow(clippy::too_many_arguments)]
pub fn solve_beamforming(
    aux: &AuxiliaryState,
    hs: &[CVec],
    noise: &[f64],
    budget: f64,
    entry: &BeamformingMatrix,
    init: &MultiplierState,
    common: bool,
    opts: &BeamformerOptions,
) -> Result<BeamformingOutcome> {
    let mut point = dual_point(aux, init.lambda.clone(), init.kappa, hs, noise, budget, common)?;
    let mut converged = false;
    let mut iterations = 0;
    let mut best: Option<(BeamformingMatrix, f64)> = None;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut feasible = point.w.clone();
        let power = feasible.power();
        if power > budget {
            feasible.scale((budget / power).sqrt());
        }
        let objective = block_objective(aux, &feasible, hs, noise, common);
        if best.as_ref().map_or(true, |(_, b)| objective > *b) {
            best = Some((feasible, objective));
        }

        let (t_min, _) = update_y(&point.t);
        let gap: f64 = point.mult.lambda.iter().zip(&point.t).map(|(l, tk)| l * (tk - t_min)).sum();
        if gap <= opts.tol {
            converged = true;
            break;
        }

        let proposal = update_multipliers(&point.mult, &point.t, power, budget, opts);
        let direction: Vec<f64> = proposal.lambda.iter().zip(&point.mult.lambda).map(|(a, b)| a - b).collect();
        let slope: f64 = direction.iter().zip(&point.t).map(|(d, tk)| d * tk).sum();
        if slope >= 0.0 {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut next = None;
        while step >= 1e-12 {
            let lambda = point.mult.lambda.iter().zip(&direction).map(|(l, d)| (l + step * d).max(0.0)).collect();
            let cand = dual_point(aux, lambda, point.mult.kappa, hs, noise, budget, common)?;
            if cand.value <= point.value + 1e-4 * step * slope {
                next = Some(cand);
                break;
            }
            step *= 0.5;
        }
        match next {
            Some(mut cand) => {
                cand.mult.rho = proposal.rho;
                point = cand;
            }
            None => break,
        }
    }
    let mult = point.mult;
    let (w, objective) = best.expect("at least one iterate");

    let entry_ok = entry.power() <= budget * (1.0 + 1e-9);
    let entry_objective = block_objective(aux, entry, hs, noise, common);
    let kept_entry = entry_ok && entry_objective > objective;
    let (w, objective) = if kept_entry { (entry.clone(), entry_objective) } else { (w, objective) };
    let y = if common { update_y(&t_values(aux, &w, hs, noise)).0 } else { 0.0 };
    Ok(BeamformingOutcome { w, multipliers: mult, y, objective, converged, iterations, kept_entry })
}
