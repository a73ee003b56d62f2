//! Fractional-programming surrogates of the private and common rates.
//!
//! For fixed auxiliary variables, `Ψ_k` and `T_k` are concave quadratics in
//! the beamformers and lower-bound `ln(1 + SINR_k)` and `ln(1 + SINR_{c,k})`.
//! [`update_aux`] picks the auxiliaries that make both bounds tight.

use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{CVec, Complex64};
use crate::rates::BeamformingMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryState {
    /// Private SINR surrogates `μ_k`.
    pub mu: Vec<f64>,
    /// Private quadratic-transform variables `ε_k`.
    pub eps: Vec<Complex64>,
    /// Common SINR surrogates `γ_k`.
    pub gamma: Vec<f64>,
    /// Common quadratic-transform variables `v_k`.
    pub v: Vec<Complex64>,
    /// Common-rate level `y = min_k T_k`.
    pub y: f64,
}

impl AuxiliaryState {
    pub fn zeros(users: usize) -> Self {
        AuxiliaryState {
            mu: alloc::vec![0.0; users],
            eps: alloc::vec![Complex64::new(0.0, 0.0); users],
            gamma: alloc::vec![0.0; users],
            v: alloc::vec![Complex64::new(0.0, 0.0); users],
            y: 0.0,
        }
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }
}

/// The three parts of `Ψ_k`: `ln(1+μ) - μ`, the linear term `Ψ_{k,1}` and
/// the quadratic penalty `Ψ_{k,2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiTerms {
    pub constant: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl PsiTerms {
    pub fn value(&self) -> f64 {
        self.constant + self.linear - self.quadratic
    }
}

fn private_power(gains: &[f64], users: usize) -> f64 {
    gains[..users].iter().sum()
}

/// `Ψ_k` split into its terms.
pub fn eval_psi(k: usize, aux: &AuxiliaryState, w: &BeamformingMatrix, h: &CVec, noise: f64) -> PsiTerms {
    let users = w.users();
    let gains = w.gains(h);
    let mu = aux.mu[k];
    let eps = aux.eps[k];
    let own = h.dotc(&w.0.column(k));
    PsiTerms {
        constant: mu.ln_1p() - mu,
        linear: 2.0 * (1.0 + mu).sqrt() * (eps.conj() * own).re,
        quadratic: eps.norm_sqr() * (private_power(&gains, users) + noise),
    }
}

/// `T_k`, the surrogate of the common decoding rate of user `k`.
pub fn eval_t(k: usize, aux: &AuxiliaryState, w: &BeamformingMatrix, h: &CVec, noise: f64) -> f64 {
    let users = w.users();
    let gains = w.gains(h);
    let gamma = aux.gamma[k];
    let v = aux.v[k];
    let common = h.dotc(&w.0.column(users));
    gamma.ln_1p() - gamma + 2.0 * (1.0 + gamma).sqrt() * (v.conj() * common).re
        - v.norm_sqr() * (gains[users] + private_power(&gains, users) + noise)
}

pub fn sum_psi(aux: &AuxiliaryState, w: &BeamformingMatrix, hs: &[CVec], noise: &[f64]) -> f64 {
    hs.iter()
        .enumerate()
        .map(|(k, h)| eval_psi(k, aux, w, h, noise[k]).value())
        .sum()
}

pub fn t_values(aux: &AuxiliaryState, w: &BeamformingMatrix, hs: &[CVec], noise: &[f64]) -> Vec<f64> {
    hs.iter()
        .enumerate()
        .map(|(k, h)| eval_t(k, aux, w, h, noise[k]))
        .collect()
}

/// Closed-form maximizers of `Ψ_k` and `T_k` over the auxiliaries.
pub fn update_aux(w: &BeamformingMatrix, hs: &[CVec], noise: &[f64]) -> AuxiliaryState {
    let users = w.users();
    let mut aux = AuxiliaryState::zeros(users);
    for (k, h) in hs.iter().enumerate() {
        let gains = w.gains(h);
        let private_total = private_power(&gains, users) + noise[k];
        let mu = gains[k] / (private_total - gains[k]);
        let own = h.dotc(&w.0.column(k));
        aux.mu[k] = mu;
        aux.eps[k] = own * ((1.0 + mu).sqrt() / private_total);

        let gamma = gains[users] / private_total;
        let common = h.dotc(&w.0.column(users));
        aux.gamma[k] = gamma;
        aux.v[k] = common * ((1.0 + gamma).sqrt() / (gains[users] + private_total));
    }
    aux.y = t_values(&aux, w, hs, noise)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    aux
}
