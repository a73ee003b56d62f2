//! Rates and surrogates evaluated term by term.

use rsma_core::fp::AuxiliaryState;
use rsma_core::Complex64;

use crate::dense::{inner, Vector};

/// Columns of a beamforming matrix: `K` private streams then the common one.
pub type Streams = Vec<Vector>;

pub fn private_sinr(k: usize, h: &[Complex64], w: &Streams, noise: f64) -> f64 {
    let users = w.len() - 1;
    let signal = inner(h, &w[k]).norm_sqr();
    let interference: f64 = (0..users).filter(|&i| i != k).map(|i| inner(h, &w[i]).norm_sqr()).sum();
    signal / (interference + noise)
}

pub fn common_sinr(h: &[Complex64], w: &Streams, noise: f64) -> f64 {
    let users = w.len() - 1;
    let signal = inner(h, &w[users]).norm_sqr();
    let interference: f64 = (0..users).map(|i| inner(h, &w[i]).norm_sqr()).sum();
    signal / (interference + noise)
}

pub fn psi(k: usize, aux: &AuxiliaryState, h: &[Complex64], w: &Streams, noise: f64) -> f64 {
    let users = w.len() - 1;
    let (mu, eps) = (aux.mu[k], aux.eps[k]);
    let mut total = noise;
    for wi in &w[..users] {
        total += inner(h, wi).norm_sqr();
    }
    (1.0 + mu).ln() - mu + 2.0 * (1.0 + mu).sqrt() * (eps.conj() * inner(h, &w[k])).re - eps.norm_sqr() * total
}

pub fn common_surrogate(k: usize, aux: &AuxiliaryState, h: &[Complex64], w: &Streams, noise: f64) -> f64 {
    let users = w.len() - 1;
    let (gamma, v) = (aux.gamma[k], aux.v[k]);
    let mut total = noise;
    for wi in w {
        total += inner(h, wi).norm_sqr();
    }
    (1.0 + gamma).ln() - gamma + 2.0 * (1.0 + gamma).sqrt() * (v.conj() * inner(h, &w[users])).re
        - v.norm_sqr() * total
}

pub fn power(w: &Streams) -> f64 {
    w.iter().map(|c| crate::dense::norm_sq(c)).sum()
}

/// Block objective `Σ_k Ψ_k + min_k T_k`.
pub fn block_value(aux: &AuxiliaryState, hs: &[Vector], w: &Streams, noise: &[f64]) -> f64 {
    let psi_sum: f64 = (0..hs.len()).map(|k| psi(k, aux, &hs[k], w, noise[k])).sum();
    let t_min = (0..hs.len())
        .map(|k| common_surrogate(k, aux, &hs[k], w, noise[k]))
        .fold(f64::INFINITY, f64::min);
    psi_sum + t_min
}

pub fn zero_streams(antennas: usize, users: usize) -> Streams {
    vec![vec![Complex64::new(0.0, 0.0); antennas]; users + 1]
}
