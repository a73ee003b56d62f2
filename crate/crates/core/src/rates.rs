//! SINRs, achievable rates and the common-rate split.
//!
//! Rates inside the solver are in nats (natural log); [`RateReport`] converts
//! to bits per second per hertz.

use alloc::vec::Vec;
use core::f64::consts::LN_2;


#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::CompositeChannel;
use crate::config::SystemConfig;
use crate::linalg::{column, frob_sq, CMat, CVec};
use crate::solver::DecisionState;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Transmit beamformers `[w_1, ..., w_K, w_c]`, one column per stream with
/// the common stream last.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix(pub CMat);

impl BeamformingMatrix {
    pub fn zeros(antennas: usize, users: usize) -> Self {
        BeamformingMatrix(CMat::zeros(antennas, users + 1))
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn users(&self) -> usize {
        self.0.ncols() - 1
    }

    pub fn private(&self, k: usize) -> CVec {
        column(&self.0, k)
    }

    pub fn common(&self) -> CVec {
        column(&self.0, self.users())
    }

    /// `tr(W^H W)`.
    pub fn power(&self) -> f64 {
        frob_sq(&self.0)
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.scale_mut(factor);
    }

    /// `|h^H w_i|^2` for every column `i`, private streams first.
    pub fn gains(&self, h: &CVec) -> Vec<f64> {
        self.0.column_iter().map(|w| h.dotc(&w).norm_sqr()).collect()
    }
}

/// Private SINR of user `k`. The common stream has been removed by SIC and
/// does not interfere.
pub fn sinr_private(k: usize, h: &CVec, w: &BeamformingMatrix, noise: f64) -> f64 {
    let g = w.gains(h);
    let users = w.users();
    let interference: f64 = (0..users).filter(|&i| i != k).map(|i| g[i]).sum();
    g[k] / (interference + noise)
}

/// SINR of the common stream at a user; every private stream interferes.
pub fn sinr_common(h: &CVec, w: &BeamformingMatrix, noise: f64) -> f64 {
    let g = w.gains(h);
    let users = w.users();
    let interference: f64 = g[..users].iter().sum();
    g[users] / (interference + noise)
}

/// `ln(1 + sinr)`.
pub fn rate(sinr: f64) -> f64 {
    sinr.ln_1p()
}

/// Equal split of the worst common decoding rate: `r_k = min_j R_{c,j} / K`.
pub fn allocate_common_rate(common_rates: &[f64]) -> Vec<f64> {
    if common_rates.is_empty() {
        return Vec::new();
    }
    let min = common_rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let share = min / common_rates.len() as f64;
    alloc::vec![share; common_rates.len()]
}

/// Private and common decoding rates (nats) of every user.
pub fn user_rates(ch: &CompositeChannel, w: &BeamformingMatrix, noise: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let private = ch
        .h
        .iter()
        .enumerate()
        .map(|(k, h)| rate(sinr_private(k, h, w, noise[k])))
        .collect();
    let common = ch
        .h
        .iter()
        .zip(noise)
        .map(|(h, &s)| rate(sinr_common(h, w, s)))
        .collect();
    (private, common)
}

/// How far a state is from satisfying each constraint family. Zero or
/// negative values mean satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `tr(W^H W) - P_T` in watts.
    pub power_excess: f64,
    /// `max_i ||φ_i| - 1|`.
    pub unit_modulus: f64,
    /// Largest distance outside `[x_min, x_max]`, meters.
    pub box_excess: f64,
    /// `D0 - min_{i≠j} |x_i - x_j|`, meters.
    pub spacing_deficit: f64,
    /// `Σ_k r_{c,k} - min_k R_{c,k}`, bits.
    pub common_excess: f64,
    /// `max_k (-r_{c,k})`, bits.
    pub negative_common: f64,
}

impl Residuals {
    /// Every constraint of the joint problem within the given tolerances:
    /// relative power slack, absolute common-rate slack (bits).
    pub fn within(&self, power_budget: f64, power_rel_tol: f64, rate_tol: f64) -> bool {
        self.power_excess <= power_budget * power_rel_tol
            && self.unit_modulus <= 1e-12
            && self.box_excess <= 0.0
            && self.spacing_deficit <= 0.0
            && self.common_excess <= rate_tol
            && self.negative_common <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Private rates `R_k`, bits/s/Hz.
    pub private: Vec<f64>,
    /// Common-stream decoding rates `R_{c,k}`, bits/s/Hz.
    pub common_decodable: Vec<f64>,
    /// Allocated common rates `r_{c,k}`, bits/s/Hz.
    pub common_alloc: Vec<f64>,
    /// `Σ_k (R_k + r_{c,k})`, bits/s/Hz.
    pub sum_rate: f64,
    pub residuals: Residuals,
}

/// Evaluates the rates of `state` over `ch` (assembled at the state's
/// positions and phases) with per-user noise powers `noise`.
///
/// Constraint violations are reported in `residuals`, never raised.
pub fn evaluate(state: &DecisionState, ch: &CompositeChannel, noise: &[f64], cfg: &SystemConfig) -> RateReport {
    let (private, common) = user_rates(ch, &state.w, noise);
    let private: Vec<f64> = private.into_iter().map(nats_to_bits).collect();
    let common_decodable: Vec<f64> = common.into_iter().map(nats_to_bits).collect();
    let common_alloc: Vec<f64> = state.r_c.iter().map(|&r| nats_to_bits(r)).collect();
    let sum_rate = private.iter().sum::<f64>() + common_alloc.iter().sum::<f64>();

    let min_common = common_decodable.iter().copied().fold(f64::INFINITY, f64::min);
    let x = state.x.as_slice();
    let box_excess = x
        .iter()
        .map(|&v| (cfg.x_min - v).max(v - cfg.x_max))
        .fold(f64::NEG_INFINITY, f64::max);
    let residuals = Residuals {
        power_excess: state.w.power() - cfg.power,
        unit_modulus: state.phi.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max),
        box_excess,
        spacing_deficit: if x.len() > 1 { cfg.min_spacing - state.x.min_gap() } else { f64::NEG_INFINITY },
        common_excess: common_alloc.iter().sum::<f64>() - min_common,
        negative_common: common_alloc.iter().map(|r| -r).fold(f64::NEG_INFINITY, f64::max),
    };
    RateReport { private, common_decodable, common_alloc, sum_rate, residuals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::AntennaPositions;
    use crate::linalg::{c, real};
    use alloc::vec;
    use alloc::vec::Vec;

    fn bf(cols: &[&[crate::Complex64]]) -> BeamformingMatrix {
        let m = cols[0].len();
        BeamformingMatrix(CMat::from_fn(m, cols.len(), |i, j| cols[j][i]))
    }

    #[test]
    fn single_user_matched_filter() {
        let p: f64 = 3.0;
        let h = CVec::from_vec(vec![real(1.0), real(0.0), real(0.0)]);
        let w = bf(&[&[real(p.sqrt()), real(0.0), real(0.0)], &[real(0.0); 3]]);
        assert!((sinr_private(0, &h, &w, 1.0) - p).abs() < 1e-12);
    }

    #[test]
    fn zero_beamformers_give_zero_sinr() {
        let h = CVec::from_vec(vec![c(0.3, 1.0), c(-2.0, 0.5)]);
        let w = BeamformingMatrix::zeros(2, 2);
        assert_eq!(sinr_private(1, &h, &w, 1.0), 0.0);
        assert_eq!(sinr_common(&h, &w, 1.0), 0.0);
    }

    #[test]
    fn common_sinr_without_private_streams() {
        let h = CVec::from_vec(vec![real(1.0), real(0.0)]);
        let w = bf(&[&[real(0.0); 2], &[real(2.0), real(5.0)]]);
        assert!((sinr_common(&h, &w, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sinrs_match_explicit_sums() {
        // Second, index-by-index evaluation of both SINR expressions.
        let h = CVec::from_vec(vec![c(0.2, -1.0), c(1.5, 0.3), c(-0.4, 0.8)]);
        let cols: [[crate::Complex64; 3]; 3] = [
            [c(0.1, 0.2), c(-0.3, 0.4), c(0.5, 0.0)],
            [c(1.0, -0.2), c(0.0, 0.7), c(-0.6, 0.1)],
            [c(0.3, 0.3), c(0.2, -0.1), c(0.9, 0.4)],
        ];
        let w = bf(&[&cols[0], &cols[1], &cols[2]]);
        let gain = |j: usize| {
            let mut acc = crate::Complex64::new(0.0, 0.0);
            for i in 0..3 {
                acc += h[i].conj() * cols[j][i];
            }
            acc.norm_sqr()
        };
        let noise = 0.7;
        let expected_private = gain(1) / (gain(0) + noise);
        let expected_common = gain(2) / (gain(0) + gain(1) + noise);
        assert!((sinr_private(1, &h, &w, noise) - expected_private).abs() < 1e-13);
        assert!((sinr_common(&h, &w, noise) - expected_common).abs() < 1e-13);
    }

    #[test]
    fn common_split_examples() {
        assert_eq!(allocate_common_rate(&[2.0, 4.0]), vec![1.0, 1.0]);
        assert_eq!(allocate_common_rate(&[3.0, 3.0, 3.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(allocate_common_rate(&[5.0]), vec![5.0]);
        let r = allocate_common_rate(&[0.7, 0.2, 0.9]);
        assert!((r.iter().sum::<f64>() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sinr_invariant_under_joint_scaling() {
        let h = CVec::from_vec(vec![c(0.2, -1.0), c(1.5, 0.3)]);
        let w = bf(&[&[c(0.1, 0.2), c(-0.3, 0.4)], &[c(1.0, -0.2), c(0.0, 0.7)], &[c(0.3, 0.3), c(0.2, -0.1)]]);
        let s = 1e-5;
        let hs = h.scale(s);
        let a = sinr_private(0, &h, &w, 0.4);
        let b = sinr_private(0, &hs, &w, 0.4 * s * s);
        assert!((a - b).abs() <= 1e-10 * a);
        let a = sinr_common(&h, &w, 0.4);
        let b = sinr_common(&hs, &w, 0.4 * s * s);
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn orthogonal_users_do_not_interfere() {
        let p: f64 = 4.0;
        let cfg = SystemConfig { antennas: 2, ..SystemConfig::default() };
        let ch = CompositeChannel {
            ris_factor: vec![CMat::zeros(1, 2); 2],
            direct: vec![],
            h: vec![CVec::from_vec(vec![real(1.0), real(0.0)]), CVec::from_vec(vec![real(0.0), real(1.0)])],
        };
        let a = (p / 2.0).sqrt();
        let w = bf(&[&[real(a), real(0.0)], &[real(0.0), real(a)], &[real(0.0); 2]]);
        let state = DecisionState {
            w,
            phi: CVec::from_element(1, real(1.0)),
            x: AntennaPositions(vec![0.0, 0.1]),
            r_c: vec![0.0, 0.0],
        };
        let report = evaluate(&state, &ch, &[1.0, 1.0], &SystemConfig { power: p, ..cfg });
        let expected = nats_to_bits((1.0 + p / 2.0).ln());
        for r in &report.private {
            assert!((r - expected).abs() < 1e-12);
        }
        assert!((report.sum_rate - 2.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn zero_beamformer_has_zero_sum_rate() {
        let cfg = SystemConfig::default();
        let ch = CompositeChannel {
            ris_factor: vec![],
            direct: vec![],
            h: (0..2).map(|k| CVec::from_element(8, c(1.0, k as f64))).collect::<Vec<_>>(),
        };
        let state = DecisionState {
            w: BeamformingMatrix::zeros(8, 2),
            phi: CVec::from_element(16, real(1.0)),
            x: AntennaPositions::equally_spaced(&cfg),
            r_c: vec![0.0, 0.0],
        };
        let report = evaluate(&state, &ch, &[1.0, 1.0], &cfg);
        assert_eq!(report.sum_rate, 0.0);
        assert!(report.residuals.within(cfg.power, 1e-6, 1e-9));
    }

    #[test]
    fn over_allocated_common_rate_is_flagged() {
        let cfg = SystemConfig::default();
        let ch = CompositeChannel {
            ris_factor: vec![],
            direct: vec![],
            h: (0..2).map(|_| CVec::from_element(8, real(1.0))).collect(),
        };
        let state = DecisionState {
            w: BeamformingMatrix::zeros(8, 2),
            phi: CVec::from_element(16, real(1.0)),
            x: AntennaPositions::equally_spaced(&cfg),
            r_c: vec![0.5, 0.5],
        };
        let report = evaluate(&state, &ch, &[1.0, 1.0], &cfg);
        assert!(report.residuals.common_excess > 0.0);
        assert!(!report.residuals.within(cfg.power, 1e-6, 1e-9));
    }
}
