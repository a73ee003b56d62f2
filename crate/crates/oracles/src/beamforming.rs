//! Dual certificate for the beamforming block
//! `max_{W,y} Σ_k Ψ_k(W) + y  s.t.  T_k(W) ≥ y,  tr(W^H W) ≤ P`.
//!
//! The block is concave, so its optimum equals the minimum of the dual
//! function `G(λ) = min_{κ≥0} max_W Σ_k Ψ_k + Σ_k λ_k T_k + κ (P − tr)` over
//! the unit simplex. The inner maximum is an unconstrained concave quadratic,
//! `κ` is found by bisection on the power and `λ` by projected gradient
//! descent with backtracking.

use rsma_core::fp::AuxiliaryState;
use rsma_core::Complex64;

use crate::dense::{solve, zero, Mat, Vector};
use crate::surrogate::{block_value, common_surrogate, power, psi, Streams};

pub struct Certificate {
    /// Dual value; an upper bound on the block optimum.
    pub upper: f64,
    /// Block objective of a feasible beamformer recovered from the dual.
    pub lower: f64,
    pub lambda: Vec<f64>,
    pub kappa: f64,
}

struct Problem<'a> {
    aux: &'a AuxiliaryState,
    hs: &'a [Vector],
    noise: &'a [f64],
    budget: f64,
}

fn gram(hs: &[Vector], weights: &[f64], kappa: f64) -> Mat {
    let m = hs[0].len();
    let mut a = vec![vec![zero(); m]; m];
    for (h, &wt) in hs.iter().zip(weights) {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += h[i] * h[j].conj() * wt;
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += Complex64::new(kappa, 0.0);
    }
    a
}

impl Problem<'_> {
    fn users(&self) -> usize {
        self.hs.len()
    }

    fn maximizer(&self, lambda: &[f64], kappa: f64) -> Streams {
        let users = self.users();
        let m = self.hs[0].len();
        let aux = self.aux;
        let private_w: Vec<f64> = (0..users).map(|k| aux.eps[k].norm_sqr() + lambda[k] * aux.v[k].norm_sqr()).collect();
        let common_w: Vec<f64> = (0..users).map(|k| lambda[k] * aux.v[k].norm_sqr()).collect();
        let mut w = Vec::with_capacity(users + 1);
        for k in 0..users {
            let rhs: Vector = self.hs[k].iter().map(|h| h * aux.eps[k] * (1.0 + aux.mu[k]).sqrt()).collect();
            w.push(solve(gram(self.hs, &private_w, kappa), rhs).expect("regular system"));
        }
        let mut rhs = vec![zero(); m];
        for k in 0..users {
            for (r, h) in rhs.iter_mut().zip(&self.hs[k]) {
                *r += h * aux.v[k] * (lambda[k] * (1.0 + aux.gamma[k]).sqrt());
            }
        }
        w.push(solve(gram(self.hs, &common_w, kappa), rhs).expect("regular system"));
        w
    }

    fn lagrangian(&self, w: &Streams, lambda: &[f64], kappa: f64) -> f64 {
        let mut v = kappa * (self.budget - power(w));
        for k in 0..self.users() {
            v += psi(k, self.aux, &self.hs[k], w, self.noise[k]);
            v += lambda[k] * common_surrogate(k, self.aux, &self.hs[k], w, self.noise[k]);
        }
        v
    }

    /// `G(λ)` with its minimizing `κ` and the matching maximizer.
    fn dual(&self, lambda: &[f64]) -> (f64, f64, Streams) {
        let scale = self.hs.iter().map(|h| crate::dense::norm_sq(h)).fold(0.0, f64::max).max(1.0);
        let mut lo = 1e-13 * scale;
        let mut hi = 1e6 * scale;
        let w_lo = self.maximizer(lambda, lo);
        if power(&w_lo) <= self.budget {
            return (self.lagrangian(&w_lo, lambda, lo), lo, w_lo);
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if power(&self.maximizer(lambda, mid)) > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        let w = self.maximizer(lambda, hi);
        (self.lagrangian(&w, lambda, hi), hi, w)
    }
}

/// Euclidean projection onto the unit simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Solves the dual of the beamforming block.
pub fn certify(aux: &AuxiliaryState, hs: &[Vector], noise: &[f64], budget: f64) -> Certificate {
    let problem = Problem { aux, hs, noise, budget };
    let users = hs.len();
    let mut lambda = vec![1.0 / users as f64; users];
    let (mut value, mut kappa, mut w) = problem.dual(&lambda);
    let mut step = 1.0;
    for _ in 0..4000 {
        let grad: Vec<f64> = (0..users).map(|k| common_surrogate(k, aux, &hs[k], &w, noise[k])).collect();
        let mut accepted = false;
        for _ in 0..60 {
            let cand = project_simplex(&lambda.iter().zip(&grad).map(|(l, g)| l - step * g).collect::<Vec<_>>());
            let diff: Vec<f64> = cand.iter().zip(&lambda).map(|(a, b)| a - b).collect();
            let dist2: f64 = diff.iter().map(|d| d * d).sum();
            if dist2 == 0.0 {
                break;
            }
            let (cv, ck, cw) = problem.dual(&cand);
            let model = value + grad.iter().zip(&diff).map(|(g, d)| g * d).sum::<f64>() + dist2 / (2.0 * step);
            if cv <= model + 1e-15 * value.abs() {
                lambda = cand;
                value = cv;
                kappa = ck;
                w = cw;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let mut feasible = w.clone();
    let p = power(&feasible);
    if p > budget {
        let s = (budget / p).sqrt();
        feasible.iter_mut().flatten().for_each(|z| *z *= s);
    }
    Certificate { upper: value, lower: block_value(aux, hs, &feasible, noise), lambda, kappa }
}
