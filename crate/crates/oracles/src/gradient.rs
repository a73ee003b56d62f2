//! Central finite differences of `Σ_k Ψ_k` in the antenna positions.

use rsma_core::channel::{assemble_channel, ChannelRealization};
use rsma_core::fp::AuxiliaryState;
use rsma_core::CVec;

use crate::dense::from_cvec;
use crate::surrogate::{psi, Streams};

pub fn psi_sum_at(real: &ChannelRealization, x: &[f64], phi: &CVec, aux: &AuxiliaryState, w: &Streams, noise: &[f64]) -> f64 {
    let ch = assemble_channel(x, phi, real).expect("consistent dimensions");
    ch.h.iter().enumerate().map(|(k, h)| psi(k, aux, &from_cvec(h), w, noise[k])).sum()
}

/// `(f(x + h e_m) − f(x − h e_m)) / 2h` for every antenna `m`.
pub fn central_difference(
    real: &ChannelRealization,
    x: &[f64],
    phi: &CVec,
    aux: &AuxiliaryState,
    w: &Streams,
    noise: &[f64],
    step: f64,
) -> Vec<f64> {
    (0..x.len())
        .map(|m| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[m] += step;
            minus[m] -= step;
            (psi_sum_at(real, &plus, phi, aux, w, noise) - psi_sum_at(real, &minus, phi, aux, w, noise)) / (2.0 * step)
        })
        .collect()
}
