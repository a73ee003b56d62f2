//! Exhaustive search of the RIS Lagrangian over quantized phases.

use rsma_core::channel::{assemble_channel, ChannelRealization};
use rsma_core::fp::AuxiliaryState;
use rsma_core::{CVec, Complex64};

use crate::dense::from_cvec;
use crate::surrogate::{common_surrogate, psi, Streams};

/// `Σ_k ξ_k (s − T_k) − Σ_k Ψ_k` at phases `phi`, evaluated on the assembled
/// channel.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian(
    real: &ChannelRealization,
    x: &[f64],
    phi: &CVec,
    aux: &AuxiliaryState,
    w: &Streams,
    noise: &[f64],
    xi: &[f64],
    s: f64,
) -> f64 {
    let ch = assemble_channel(x, phi, real).expect("consistent dimensions");
    let mut value = 0.0;
    for (k, h) in ch.h.iter().enumerate() {
        let h = from_cvec(h);
        value -= psi(k, aux, &h, w, noise[k]);
        value += xi[k] * (s - common_surrogate(k, aux, &h, w, noise[k]));
    }
    value
}

/// Smallest Lagrangian over all `levels^N` phase combinations
/// `e^{j 2π q / levels}`, and the phases attaining it.
#[allow(clippy::too_many_arguments)]
pub fn grid_minimum(
    real: &ChannelRealization,
    x: &[f64],
    aux: &AuxiliaryState,
    w: &Streams,
    noise: &[f64],
    xi: &[f64],
    s: f64,
    levels: usize,
) -> (f64, CVec) {
    let n = real.ris_elements();
    let roots: Vec<Complex64> = (0..levels)
        .map(|q| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * q as f64 / levels as f64))
        .collect();
    let mut digits = vec![0usize; n];
    let mut best = (f64::INFINITY, CVec::zeros(n));
    loop {
        let phi = CVec::from_fn(n, |i, _| roots[digits[i]]);
        let v = lagrangian(real, x, &phi, aux, w, noise, xi, s);
        if v < best.0 {
            best = (v, phi);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            digits[i] += 1;
            if digits[i] < levels {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
