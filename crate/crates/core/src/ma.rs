//! Antenna position update: projected gradient ascent on `Σ_k Ψ_k` with
//! step halving.

use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{AntennaPositions, ChannelRows, PositionModel};
use crate::fp::{sum_psi, t_values, AuxiliaryState};
use crate::linalg::{CVec, Complex64};
use crate::rates::BeamformingMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaOptions {
    /// Initial step, meters: the displacement of the antenna with the
    /// largest gradient entry.
    pub alpha0: f64,
    /// Stop once the objective changes by at most this much.
    pub eps: f64,
    pub max_iter: usize,
    /// Step below which the search gives up, meters.
    pub min_step: f64,
}

impl MaOptions {
    pub fn for_wavelength(wavelength: f64) -> Self {
        MaOptions { alpha0: 0.1 * wavelength, eps: 1e-6, max_iter: 50, min_step: 1e-15 }
    }
}

/// Box and spacing limits of the antenna positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub min_spacing: f64,
}

/// Gradient of one surrogate `c + 2 Re{a^* h^H w_j} - q Σ_{i∈S} |h^H w_i|²`
/// of user `k`, accumulated into `grad`.
fn accumulate(
    grad: &mut [f64],
    rows: &ChannelRows,
    k: usize,
    w: &BeamformingMatrix,
    linear: (Complex64, usize),
    quadratic: f64,
    streams: core::ops::Range<usize>,
) {
    let row = &rows.rows[k];
    let der = &rows.derivs[k];
    let (a, j) = linear;
    // h^H w_i for every stream in the penalty
    let gains: Vec<(usize, Complex64)> = streams.map(|i| (i, row.dot(&w.0.column(i)))).collect();
    for (m, g) in grad.iter_mut().enumerate() {
        let d = der[m];
        let mut s = 2.0 * (a.conj() * d * w.0[(m, j)]).re;
        for &(i, gi) in &gains {
            s -= 2.0 * quadratic * (gi.conj() * d * w.0[(m, i)]).re;
        }
        *g += s;
    }
}

/// Gradient of `Σ_k Ψ_k` with respect to the positions, from rows and their
/// per-antenna derivatives.
pub fn psi_gradient(aux: &AuxiliaryState, w: &BeamformingMatrix, rows: &ChannelRows) -> Vec<f64> {
    let users = rows.rows.len();
    let mut grad = alloc::vec![0.0; w.antennas()];
    for k in 0..users {
        let a = aux.eps[k] * (1.0 + aux.mu[k]).sqrt();
        accumulate(&mut grad, rows, k, w, (a, k), aux.eps[k].norm_sqr(), 0..users);
    }
    grad
}

/// Gradient of `T_k` with respect to the positions.
pub fn t_gradient(k: usize, aux: &AuxiliaryState, w: &BeamformingMatrix, rows: &ChannelRows) -> Vec<f64> {
    let users = rows.rows.len();
    let mut grad = alloc::vec![0.0; w.antennas()];
    let a = aux.v[k] * (1.0 + aux.gamma[k]).sqrt();
    accumulate(&mut grad, rows, k, w, (a, users), aux.v[k].norm_sqr(), 0..users + 1);
    grad
}

/// `∂(Σ_k Ψ_k)/∂x` at positions `x` for fixed phases baked into `model`.
pub fn grad_positions(x: &[f64], aux: &AuxiliaryState, w: &BeamformingMatrix, model: &PositionModel) -> Vec<f64> {
    psi_gradient(aux, w, &model.rows_with_derivs(x))
}

/// How the common-rate surrogates enter the position update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommonCoupling<'a> {
    /// No common stream.
    None,
    /// Constraints `T_k(x) ≥ y` at a fixed level `y`.
    Fixed(f64),
    /// `Σ_k λ_k T_k` joins the objective, with `λ` on the unit simplex.
    /// This is the Lagrangian of the `T_k ≥ y` constraints at multipliers
    /// `λ`, since the `y` terms cancel.
    Weighted(&'a [f64]),
}

/// Euclidean projection onto the box and spacing constraints, keeping the
/// antennas in the order given by `order` (indices sorted by position).
///
/// With `z_i = x_(i) - i D0` the feasible set is `{z nondecreasing,
/// x_min ≤ z ≤ x_max - (M-1) D0}`; the projection is the isotonic fit of `z`
/// clamped to that interval.
pub fn project_layout(x: &[f64], order: &[usize], region: &Region) -> AntennaPositions {
    let n = x.len();
    let d0 = region.min_spacing;
    let lo = region.x_min;
    let hi = region.x_max - d0 * n.saturating_sub(1) as f64;
    // Pool adjacent violators: blocks of (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, &idx) in order.iter().enumerate() {
        blocks.push((x[idx] - d0 * i as f64, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 <= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s0 + s1, c0 + c1);
        }
    }
    let mut out = alloc::vec![0.0; n];
    let mut i = 0;
    for (sum, count) in blocks {
        let z = (sum / count as f64).clamp(lo, hi);
        for _ in 0..count {
            out[order[i]] = z + d0 * i as f64;
            i += 1;
        }
    }
    // Restore exact feasibility lost to rounding: every computed gap must
    // reach D0, not just the real-number one.
    for i in 1..n {
        let prev = out[order[i - 1]];
        let cur = &mut out[order[i]];
        *cur = cur.max(prev + d0);
        while *cur - prev < d0 {
            *cur = next_toward(*cur, f64::INFINITY);
        }
    }
    if n > 0 && out[order[n - 1]] > region.x_max {
        out[order[n - 1]] = region.x_max;
        for i in (0..n - 1).rev() {
            let next = out[order[i + 1]];
            let cur = &mut out[order[i]];
            *cur = cur.min(next - d0);
            while next - *cur < d0 {
                *cur = next_toward(*cur, f64::NEG_INFINITY);
            }
        }
    }
    AntennaPositions(out)
}

/// Adjacent float from `x` in the direction of `target`.
fn next_toward(x: f64, target: f64) -> f64 {
    if x == target || x.is_nan() {
        return x;
    }
    if x == 0.0 {
        let tiny = f64::from_bits(1);
        return if target > 0.0 { tiny } else { -tiny };
    }
    let bits = x.to_bits();
    if (target > x) == (x > 0.0) {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Box, spacing, and `T_k(x) ≥ y` for all users.
pub fn feasible(x: &AntennaPositions, region: &Region, y: f64, t: &[f64]) -> bool {
    x.is_feasible(region.x_min, region.x_max, region.min_spacing) && t.iter().all(|&tk| tk >= y)
}

#[derive(Debug, Clone)]
pub struct MaOutcome {
    pub x: AntennaPositions,
    pub objective: f64,
    /// Objective after each accepted step, starting with the entry value.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub halvings: usize,
    pub converged: bool,
    pub stalled: bool,
}

/// Projected gradient ascent `x ← Π(x + α ∇/‖∇‖_∞)` onto the box and
/// spacing constraints. A candidate that violates `T_k ≥ y` or fails to
/// improve the objective halves `α` and is retried from the same point.
///
/// The objective is `Σ_k Ψ_k`, plus `Σ_k λ_k T_k` under
/// [`CommonCoupling::Weighted`].
#[allow(clippy::too_many_arguments)]
pub fn optimize_positions(
    x0: &AntennaPositions,
    aux: &AuxiliaryState,
    w: &BeamformingMatrix,
    model: &PositionModel,
    noise: &[f64],
    region: &Region,
    coupling: CommonCoupling<'_>,
    opts: &MaOptions,
) -> MaOutcome {
    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let hs: Vec<CVec> = model.channels(x);
        let psi = sum_psi(aux, w, &hs, noise);
        match coupling {
            CommonCoupling::None => (psi, Vec::new()),
            CommonCoupling::Fixed(_) => (psi, t_values(aux, w, &hs, noise)),
            CommonCoupling::Weighted(lambda) => {
                let t = t_values(aux, w, &hs, noise);
                (psi + t.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>(), t)
            }
        }
    };
    let y = match coupling {
        CommonCoupling::Fixed(y) => y,
        _ => f64::NEG_INFINITY,
    };

    let mut x = x0.clone();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x.0[a].total_cmp(&x.0[b]));
    let (mut objective, _) = eval(x.as_slice());
    let mut history = alloc::vec![objective];
    let mut alpha = opts.alpha0;
    let mut iterations = 0;
    let mut halvings = 0;
    let mut converged = false;
    let mut stalled = false;

    'outer: while iterations < opts.max_iter {
        let rows = model.rows_with_derivs(x.as_slice());
        let mut grad = psi_gradient(aux, w, &rows);
        if let CommonCoupling::Weighted(lambda) = coupling {
            for (k, &l) in lambda.iter().enumerate() {
                if l > 0.0 {
                    grad.iter_mut().zip(t_gradient(k, aux, w, &rows)).for_each(|(g, d)| *g += l * d);
                }
            }
        }
        let largest = grad.iter().fold(0.0, |a: f64, g| a.max(g.abs()));
        let predicted = alpha * grad.iter().map(|g| g * g).sum::<f64>() / largest;
        // Also catches a vanishing gradient.
        if !(predicted > opts.eps) {
            iterations += 1;
            converged = true;
            break;
        }
        // α is the displacement of the fastest-moving antenna, meters.
        grad.iter_mut().for_each(|g| *g /= largest);
        loop {
            let stepped: Vec<f64> = x.0.iter().zip(&grad).map(|(xi, g)| xi + alpha * g).collect();
            let cand = project_layout(&stepped, &order, region);
            let (value, cand_t) = eval(cand.as_slice());
            if feasible(&cand, region, y, &cand_t) && value >= objective {
                iterations += 1;
                let change = value - objective;
                x = cand;
                objective = value;
                history.push(value);
                if change <= opts.eps {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            alpha *= 0.5;
            halvings += 1;
            if alpha < opts.min_step {
                stalled = true;
                break 'outer;
            }
        }
    }

    MaOutcome { x, objective, history, iterations, halvings, converged, stalled }
}
