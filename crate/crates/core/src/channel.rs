//! Field-response channel model.
//!
//! Each antenna moves along a line; the phase it sees on path `l` is
//! `2π/λ · x_m · cos θ_l`. The base station to RIS link is `B^H Σ A(x)`, the
//! direct link to user `k` is `1^H Σ_k A_k(x)` and the RIS to user link
//! `h_{r,k}` is fixed. For RIS phases `φ` (reflection matrix
//! `Φ = diag(φ*)`), the composite channel is
//!
//! ```text
//! h_k^H = h_{r,k}^H Φ B^H Σ A(x) + 1^H Σ_k A_k(x) = φ^H U_k + u_k^H
//! ```

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use num_traits::Float;

use crate::config::SystemConfig;
use crate::linalg::{cis, CMat, CVec, Complex64};
use crate::{Error, Result};

/// Scalar antenna positions along the movement segment, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPositions(pub Vec<f64>);

impl AntennaPositions {
    /// Positions spread evenly over `[x_min, x_max]`; a single antenna sits
    /// at the center.
    pub fn equally_spaced(cfg: &SystemConfig) -> Self {
        let m = cfg.antennas;
        if m == 1 {
            return AntennaPositions(alloc::vec![0.5 * (cfg.x_min + cfg.x_max)]);
        }
        let step = (cfg.x_max - cfg.x_min) / (m - 1) as f64;
        AntennaPositions((0..m).map(|i| cfg.x_min + step * i as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Smallest pairwise distance, or `+inf` for a single antenna.
    pub fn min_gap(&self) -> f64 {
        let mut sorted = self.0.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Box and spacing constraints (both closed).
    pub fn is_feasible(&self, x_min: f64, x_max: f64, min_spacing: f64) -> bool {
        self.0.iter().all(|&x| x >= x_min && x <= x_max) && self.min_gap() >= min_spacing
    }
}

/// One random draw of every propagation quantity. Immutable after sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub wavelength: f64,
    /// Departure angles at the base station towards the RIS (L).
    pub theta_t: Vec<f64>,
    /// Elevation and azimuth arrival angles at the RIS (L each).
    pub theta_r: Vec<f64>,
    pub phi_r: Vec<f64>,
    /// Departure angles at the base station towards each user (K × L).
    pub theta_kt: Vec<Vec<f64>>,
    /// Diagonal of the base station to RIS fading matrix Σ.
    pub sigma: Vec<Complex64>,
    /// Diagonals of the base station to user fading matrices Σ_k.
    pub sigma_k: Vec<Vec<Complex64>>,
    /// RIS to user channels h_{r,k} (K vectors of length N).
    pub h_rk: Vec<CVec>,
    /// Departure angles at the RIS towards each user, used to build h_{r,k}.
    pub ris_user_theta: Vec<Vec<f64>>,
    pub ris_user_phi: Vec<Vec<f64>>,
    /// Diagonals of the RIS to user fading matrices.
    pub sigma_ris_user: Vec<Vec<Complex64>>,
    /// Local element coordinates on the RIS plane (meters).
    pub ris_coords: Vec<[f64; 2]>,
    pub user_pos: Vec<[f64; 2]>,
    pub bs_pos: [f64; 2],
    pub ris_pos: [f64; 2],
}

/// Factors of the composite channel at a fixed `(x, φ)`.
#[derive(Debug, Clone)]
pub struct CompositeChannel {
    /// `U_k = diag(h_{r,k}^H) B^H Σ A(x)`, N × M.
    pub ris_factor: Vec<CMat>,
    /// `u_k` with `u_k^H = 1^H Σ_k A_k(x)`.
    pub direct: Vec<CVec>,
    /// Composite channels `h_k`.
    pub h: Vec<CVec>,
}

impl CompositeChannel {
    pub fn users(&self) -> usize {
        self.h.len()
    }

    /// Channel with only the direct links (no RIS).
    pub fn without_ris(&self) -> CompositeChannel {
        CompositeChannel {
            ris_factor: self.ris_factor.iter().map(|u| CMat::zeros(u.nrows(), u.ncols())).collect(),
            direct: self.direct.clone(),
            h: self.direct.clone(),
        }
    }
}

/// Free-space constant `C0 = (λ / 4π)^2`.
pub fn reference_gain(wavelength: f64) -> f64 {
    let r = wavelength / (4.0 * PI);
    r * r
}

/// Large-scale gain `C0 (d0 / d)^α`.
pub fn path_gain(wavelength: f64, reference_distance: f64, distance: f64, exponent: f64) -> f64 {
    reference_gain(wavelength) * (reference_distance / distance).powf(exponent)
}

/// Variances of a link with a line-of-sight first path: `p/(p+1)·g` on the
/// first entry and `g/(p+1)/(L-1)` on the others.
pub fn rician_variances(gain: f64, rician_factor: f64, paths: usize) -> Vec<f64> {
    let p = rician_factor;
    (0..paths)
        .map(|i| {
            if i == 0 {
                p / (p + 1.0) * gain
            } else {
                gain / (p + 1.0) / (paths - 1) as f64
            }
        })
        .collect()
}

/// Variances of a link without line of sight: `g/(p+1)/L` on every entry.
pub fn nlos_variances(gain: f64, rician_factor: f64, paths: usize) -> Vec<f64> {
    let v = gain / (rician_factor + 1.0) / paths as f64;
    alloc::vec![v; paths]
}

/// Local RIS element coordinates on a near-square grid with λ/2 pitch,
/// filled row by row.
pub fn ris_grid(elements: usize, wavelength: f64) -> Vec<[f64; 2]> {
    let cols = (elements as f64).sqrt().ceil().max(1.0) as usize;
    let pitch = 0.5 * wavelength;
    (0..elements)
        .map(|i| [(i % cols) as f64 * pitch, (i / cols) as f64 * pitch])
        .collect()
}

/// Transmit field-response matrix, `L × M`, entry `(l, m) = exp(j 2π/λ x_m cos θ_l)`.
pub fn frm_tx(x: &[f64], angles: &[f64], wavelength: f64) -> CMat {
    let k = 2.0 * PI / wavelength;
    CMat::from_fn(angles.len(), x.len(), |l, m| cis(k * x[m] * angles[l].cos()))
}

/// RIS steering matrix `B`, `L × N`, entry
/// `(l, i) = exp(j 2π/λ (x_i sin θ_l cos φ_l + y_i cos θ_l))`.
pub fn ris_steering(coords: &[[f64; 2]], theta: &[f64], phi: &[f64], wavelength: f64) -> CMat {
    let k = 2.0 * PI / wavelength;
    CMat::from_fn(theta.len(), coords.len(), |l, i| {
        let [xr, yr] = coords[i];
        cis(k * (xr * theta[l].sin() * phi[l].cos() + yr * theta[l].cos()))
    })
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

fn angles<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..=PI)).collect()
}

/// Draws a propagation scenario. Deterministic in `cfg.seed`.
pub fn sample_scenario(cfg: &SystemConfig) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = cfg.paths();
    let k_users = cfg.users;
    let n = cfg.ris_elements;
    let lambda = cfg.wavelength;
    let geo = &cfg.geometry;

    let user_pos: Vec<[f64; 2]> = (0..k_users)
        .map(|_| {
            let x = rng.gen_range(geo.user_x[0]..=geo.user_x[1]);
            let y = rng.gen_range(geo.user_y[0]..=geo.user_y[1]);
            [x, y]
        })
        .collect();

    let theta_t = angles(&mut rng, l);
    let theta_r = angles(&mut rng, l);
    let phi_r = angles(&mut rng, l);
    let theta_kt: Vec<Vec<f64>> = (0..k_users).map(|_| angles(&mut rng, l)).collect();
    let ris_user_theta: Vec<Vec<f64>> = (0..k_users).map(|_| angles(&mut rng, l)).collect();
    let ris_user_phi: Vec<Vec<f64>> = (0..k_users).map(|_| angles(&mut rng, l)).collect();

    let d0 = cfg.reference_distance;
    let p = cfg.rician_factor;

    let bs_ris_gain = path_gain(lambda, d0, distance(geo.bs, geo.ris), cfg.pathloss_bs_ris);
    let sigma: Vec<Complex64> = rician_variances(bs_ris_gain, p, l)
        .into_iter()
        .map(|v| complex_gaussian(&mut rng, v))
        .collect();

    let sigma_k: Vec<Vec<Complex64>> = user_pos
        .iter()
        .map(|&u| {
            let g = path_gain(lambda, d0, distance(geo.bs, u), cfg.pathloss_bs_user);
            nlos_variances(g, p, l)
                .into_iter()
                .map(|v| complex_gaussian(&mut rng, v))
                .collect()
        })
        .collect();

    let sigma_ris_user: Vec<Vec<Complex64>> = user_pos
        .iter()
        .map(|&u| {
            let g = path_gain(lambda, d0, distance(geo.ris, u), cfg.pathloss_ris_user);
            rician_variances(g, p, l)
                .into_iter()
                .map(|v| complex_gaussian(&mut rng, v))
                .collect()
        })
        .collect();

    let ris_coords = ris_grid(n, lambda);
    // h_{r,k}^H = 1^H Σ_{3,k} B_k with B_k the RIS departure steering matrix.
    let h_rk: Vec<CVec> = (0..k_users)
        .map(|k| {
            let b = ris_steering(&ris_coords, &ris_user_theta[k], &ris_user_phi[k], lambda);
            CVec::from_fn(n, |i, _| {
                let row: Complex64 = (0..l).map(|p| sigma_ris_user[k][p] * b[(p, i)]).sum();
                row.conj()
            })
        })
        .collect();

    Ok(ChannelRealization {
        wavelength: lambda,
        theta_t,
        theta_r,
        phi_r,
        theta_kt,
        sigma,
        sigma_k,
        h_rk,
        ris_user_theta,
        ris_user_phi,
        sigma_ris_user,
        ris_coords,
        user_pos,
        bs_pos: geo.bs,
        ris_pos: geo.ris,
    })
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.h_rk.len()
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_coords.len()
    }

    pub fn paths(&self) -> usize {
        self.sigma.len()
    }

    /// Checks that the realization was drawn for `cfg`'s dimensions.
    pub fn check_dimensions(&self, cfg: &SystemConfig) -> Result<()> {
        let check = |what, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { what, expected, got })
            }
        };
        check("users", cfg.users, self.users())?;
        check("ris elements", cfg.ris_elements, self.ris_elements())?;
        check("paths", cfg.paths(), self.paths())?;
        check("transmit angles", cfg.paths(), self.theta_t.len())?;
        check("user fading", cfg.users, self.sigma_k.len())?;
        for (h, s) in self.h_rk.iter().zip(&self.sigma_k) {
            check("ris-user channel", cfg.ris_elements, h.len())?;
            check("user fading paths", cfg.paths(), s.len())?;
        }
        Ok(())
    }

    /// RIS receive steering matrix `B`.
    pub fn steering(&self) -> CMat {
        ris_steering(&self.ris_coords, &self.theta_r, &self.phi_r, self.wavelength)
    }

    /// `B^H Σ`, N × L.
    fn ris_left_factor(&self) -> CMat {
        let mut left = self.steering().adjoint();
        for (mut col, s) in left.column_iter_mut().zip(&self.sigma) {
            col *= *s;
        }
        left
    }

    /// Multiplies every user link (`Σ_k` and `h_{r,k}`) of user `k` by
    /// `scale[k]`; the composite channel of user `k` scales by the same
    /// factor.
    pub fn scale_user_links(&self, scale: &[f64]) -> ChannelRealization {
        let mut out = self.clone();
        for (k, &c) in scale.iter().enumerate() {
            for s in &mut out.sigma_k[k] {
                *s *= c;
            }
            out.h_rk[k] *= Complex64::new(c, 0.0);
        }
        out
    }

    /// Divides the links of every user by its noise amplitude so that the
    /// effective noise power is one. SINRs are unchanged.
    pub fn normalized(&self, noise_power: &[f64]) -> ChannelRealization {
        let scale: Vec<f64> = noise_power.iter().map(|s| 1.0 / s.sqrt()).collect();
        self.scale_user_links(&scale)
    }

    /// Removes the RIS path (all `h_{r,k} = 0`).
    pub fn without_ris(&self) -> ChannelRealization {
        let mut out = self.clone();
        for h in &mut out.h_rk {
            h.fill(Complex64::new(0.0, 0.0));
        }
        out
    }

    /// Assembles `U_k`, `u_k` and `h_k` at antenna positions `x` and RIS
    /// phases `phi`.
    pub fn assemble(&self, x: &[f64], phi: &CVec) -> Result<CompositeChannel> {
        assemble_channel(x, phi, self)
    }
}

/// Builds the composite channel `h_k^H = φ^H U_k + u_k^H` for every user.
pub fn assemble_channel(x: &[f64], phi: &CVec, real: &ChannelRealization) -> Result<CompositeChannel> {
    let n = real.ris_elements();
    if phi.len() != n {
        return Err(Error::DimensionMismatch { what: "ris phases", expected: n, got: phi.len() });
    }
    let l = real.paths();
    if real.theta_t.len() != l {
        return Err(Error::DimensionMismatch { what: "transmit angles", expected: l, got: real.theta_t.len() });
    }
    let a = frm_tx(x, &real.theta_t, real.wavelength);
    let h_br = real.ris_left_factor() * a;
    let m = x.len();

    let mut ris_factor = Vec::with_capacity(real.users());
    let mut direct = Vec::with_capacity(real.users());
    let mut h = Vec::with_capacity(real.users());
    for k in 0..real.users() {
        let sk = &real.sigma_k[k];
        if sk.len() != l || real.theta_kt[k].len() != l {
            return Err(Error::DimensionMismatch { what: "user fading paths", expected: l, got: sk.len() });
        }
        if real.h_rk[k].len() != n {
            return Err(Error::DimensionMismatch { what: "ris-user channel", expected: n, got: real.h_rk[k].len() });
        }
        let ak = frm_tx(x, &real.theta_kt[k], real.wavelength);
        // u_k^H = 1^H Σ_k A_k(x)
        let u_row: CVec = CVec::from_fn(m, |j, _| (0..l).map(|p| sk[p] * ak[(p, j)]).sum());
        let u = u_row.map(|z| z.conj());

        let hr = &real.h_rk[k];
        let uk = CMat::from_fn(n, m, |i, j| hr[i].conj() * h_br[(i, j)]);

        // h_k^H = φ^H U_k + u_k^H
        let row = uk.transpose() * phi.map(|z| z.conj()) + &u_row;
        h.push(row.map(|z| z.conj()));
        ris_factor.push(uk);
        direct.push(u);
    }
    Ok(CompositeChannel { ris_factor, direct, h })
}

/// Composite channel as a function of the antenna positions only, at fixed
/// RIS phases. Row `m` of user `k` is
/// `Σ_l α_{k,l} e^{j k0 x_m cos θ_l} + Σ_l β_{k,l} e^{j k0 x_m cos θ_{k,l}}`
/// with `α_k^T = h_{r,k}^H Φ B^H Σ` and `β_k = diag(Σ_k)`.
#[derive(Debug, Clone)]
pub struct PositionModel {
    wavenumber: f64,
    cos_ris: Vec<f64>,
    cos_user: Vec<Vec<f64>>,
    alpha: Vec<Vec<Complex64>>,
    beta: Vec<Vec<Complex64>>,
}

/// Rows `h_k^H` and their derivatives with respect to the position of the
/// antenna they belong to.
#[derive(Debug, Clone)]
pub struct ChannelRows {
    pub rows: Vec<CVec>,
    pub derivs: Vec<CVec>,
}

impl ChannelRows {
    /// Composite channel vectors `h_k` (conjugates of the rows).
    pub fn channels(&self) -> Vec<CVec> {
        self.rows.iter().map(|r| r.map(|z| z.conj())).collect()
    }
}

impl PositionModel {
    pub fn new(real: &ChannelRealization, phi: &CVec) -> Result<Self> {
        let n = real.ris_elements();
        if phi.len() != n {
            return Err(Error::DimensionMismatch { what: "ris phases", expected: n, got: phi.len() });
        }
        let left = real.ris_left_factor();
        let alpha = real
            .h_rk
            .iter()
            .map(|hr| {
                // α_{k,l} = Σ_i conj(h_{r,k,i}) conj(φ_i) (B^H Σ)_{i,l}
                (0..real.paths())
                    .map(|l| (0..n).map(|i| hr[i].conj() * phi[i].conj() * left[(i, l)]).sum())
                    .collect()
            })
            .collect();
        Ok(PositionModel {
            wavenumber: 2.0 * PI / real.wavelength,
            cos_ris: real.theta_t.iter().map(|t| t.cos()).collect(),
            cos_user: real.theta_kt.iter().map(|ts| ts.iter().map(|t| t.cos()).collect()).collect(),
            alpha,
            beta: real.sigma_k.clone(),
        })
    }

    pub fn users(&self) -> usize {
        self.alpha.len()
    }

    fn row_entry(&self, k: usize, xm: f64, with_deriv: bool) -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        let terms = self
            .alpha[k]
            .iter()
            .zip(&self.cos_ris)
            .chain(self.beta[k].iter().zip(&self.cos_user[k]));
        for (&coef, &cs) in terms {
            let e = coef * cis(self.wavenumber * xm * cs);
            v += e;
            if with_deriv {
                d += e * Complex64::new(0.0, self.wavenumber * cs);
            }
        }
        (v, d)
    }

    /// Composite channel vectors `h_k` at positions `x`.
    pub fn channels(&self, x: &[f64]) -> Vec<CVec> {
        (0..self.users())
            .map(|k| CVec::from_fn(x.len(), |m, _| self.row_entry(k, x[m], false).0.conj()))
            .collect()
    }

    pub fn rows_with_derivs(&self, x: &[f64]) -> ChannelRows {
        let mut rows = Vec::with_capacity(self.users());
        let mut derivs = Vec::with_capacity(self.users());
        for k in 0..self.users() {
            let mut r = CVec::zeros(x.len());
            let mut d = CVec::zeros(x.len());
            for (m, &xm) in x.iter().enumerate() {
                let (v, dv) = self.row_entry(k, xm, true);
                r[m] = v;
                d[m] = dv;
            }
            rows.push(r);
            derivs.push(d);
        }
        ChannelRows { rows, derivs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real};
    use alloc::vec;

    fn cfg() -> SystemConfig {
        SystemConfig::default()
    }

    fn unit_phases(n: usize, seed: u64) -> CVec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CVec::from_fn(n, |_, _| cis(rng.gen_range(0.0..2.0 * PI)))
    }

    #[test]
    fn frm_zero_positions_is_all_ones() {
        let a = frm_tx(&[0.0; 5], &[0.3, 1.0, 2.0], 0.125);
        assert!(a.iter().all(|z| (z - real(1.0)).norm() < 1e-15));
    }

    #[test]
    fn frm_broadside_is_all_ones() {
        let half_pi = PI / 2.0;
        let a = frm_tx(&[-0.3, 0.1, 0.7], &[half_pi; 4], 0.125);
        assert!(a.iter().all(|z| (z - real(1.0)).norm() < 1e-14));
    }

    #[test]
    fn frm_quarter_wave_gives_j() {
        let a = frm_tx(&[0.125 / 4.0], &[0.0], 0.125);
        assert!((a[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_at_origin_is_all_ones() {
        let b = ris_steering(&[[0.0, 0.0]; 6], &[0.4, 1.1], &[2.0, 0.2], 0.125);
        assert_eq!(b.shape(), (2, 6));
        assert!(b.iter().all(|z| (z - real(1.0)).norm() < 1e-15));
    }

    #[test]
    fn steering_with_vanishing_phase() {
        let coords = [[0.3, 0.0], [-1.2, 0.0], [5.0, 0.0]];
        let b = ris_steering(&coords, &[PI / 2.0], &[PI / 2.0], 0.125);
        assert!(b.iter().all(|z| (z - real(1.0)).norm() < 1e-12));
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        let real_ = sample_scenario(&cfg()).unwrap();
        let b = real_.steering();
        assert!(b.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn ris_grid_is_four_by_four() {
        let g = ris_grid(16, 0.125);
        assert_eq!(g[3], [3.0 * 0.0625, 0.0]);
        assert_eq!(g[4], [0.0, 0.0625]);
        assert_eq!(g[15], [3.0 * 0.0625, 3.0 * 0.0625]);
        let g = ris_grid(5, 0.125);
        assert_eq!(g.len(), 5);
        assert_eq!(g[3], [0.0, 0.0625]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_scenario(&cfg()).unwrap();
        let b = sample_scenario(&cfg()).unwrap();
        assert_eq!(a, b);
        let mut other = cfg();
        other.seed = 1;
        assert_ne!(a, sample_scenario(&other).unwrap());
    }

    #[test]
    fn angles_and_geometry_in_range() {
        let r = sample_scenario(&cfg()).unwrap();
        let all = r
            .theta_t
            .iter()
            .chain(&r.theta_r)
            .chain(&r.phi_r)
            .chain(r.theta_kt.iter().flatten());
        for &a in all {
            assert!((0.0..=PI).contains(&a));
        }
        for u in &r.user_pos {
            assert!((20.0..=40.0).contains(&u[0]));
            assert!((-20.0..=0.0).contains(&u[1]));
        }
        assert_eq!(r.ris_pos, [12.0, 16.0]);
    }

    #[test]
    fn no_los_mass_without_rician_factor() {
        let v = rician_variances(2.0, 0.0, 4);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn user_variance_matches_closed_form() {
        let lambda = 0.125;
        let d: f64 = 30.0;
        let expected = (lambda / (4.0 * PI)).powi(2) * (1.0 / d).powf(3.5) / 1.5 / 4.0;
        let v = nlos_variances(path_gain(lambda, 1.0, d, 3.5), 0.5, 4);
        for x in v {
            assert!((x - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn direct_path_only_when_ris_links_vanish() {
        let r = sample_scenario(&cfg()).unwrap().without_ris();
        let x = AntennaPositions::equally_spaced(&cfg());
        let ch = r.assemble(x.as_slice(), &unit_phases(16, 3)).unwrap();
        for k in 0..2 {
            assert!((&ch.h[k] - &ch.direct[k]).norm() < 1e-30);
        }
    }

    #[test]
    fn ris_path_only_when_direct_links_vanish() {
        let mut r = sample_scenario(&cfg()).unwrap();
        for s in r.sigma_k.iter_mut().flatten() {
            *s = Complex64::new(0.0, 0.0);
        }
        let x = AntennaPositions::equally_spaced(&cfg());
        let phi = unit_phases(16, 4);
        let ch = r.assemble(x.as_slice(), &phi).unwrap();
        for k in 0..2 {
            let row = ch.ris_factor[k].transpose() * phi.map(|z| z.conj());
            assert!((row.map(|z| z.conj()) - &ch.h[k]).norm() <= 1e-12 * ch.h[k].norm());
        }
    }

    #[test]
    fn decomposition_matches_direct_evaluation() {
        let cfg = cfg();
        let r = sample_scenario(&cfg).unwrap();
        let x = AntennaPositions::equally_spaced(&cfg);
        let phi = unit_phases(16, 9);
        let ch = r.assemble(x.as_slice(), &phi).unwrap();
        // h_k^H = h_rk^H Φ B^H Σ A + 1^H Σ_k A_k, evaluated term by term.
        let a = frm_tx(x.as_slice(), &r.theta_t, r.wavelength);
        let sigma = CMat::from_diagonal(&CVec::from_vec(r.sigma.clone()));
        let h_br = r.steering().adjoint() * sigma * a;
        let big_phi = CMat::from_diagonal(&phi.map(|z| z.conj()));
        for k in 0..2 {
            let ak = frm_tx(x.as_slice(), &r.theta_kt[k], r.wavelength);
            let sk = CMat::from_diagonal(&CVec::from_vec(r.sigma_k[k].clone()));
            let ones = CVec::from_element(4, real(1.0));
            let row = r.h_rk[k].adjoint() * &big_phi * &h_br + ones.adjoint() * sk * ak;
            let diff = row.adjoint() - &ch.h[k];
            assert!(diff.norm() <= 1e-12 * ch.h[k].norm());
        }
    }

    #[test]
    fn position_model_agrees_with_assembly() {
        let cfg = cfg();
        let r = sample_scenario(&cfg).unwrap();
        let phi = unit_phases(16, 5);
        let x = vec![-0.5, -0.3, -0.1, 0.05, 0.2, 0.33, 0.5, 0.7];
        let ch = r.assemble(&x, &phi).unwrap();
        let model = PositionModel::new(&r, &phi).unwrap();
        let hs = model.channels(&x);
        for k in 0..2 {
            assert!((&hs[k] - &ch.h[k]).norm() <= 1e-12 * ch.h[k].norm());
        }
        let rows = model.rows_with_derivs(&x).channels();
        assert!((&rows[1] - &ch.h[1]).norm() <= 1e-12 * ch.h[1].norm());
    }

    #[test]
    fn user_link_scaling_scales_channel() {
        let cfg = cfg();
        let r = sample_scenario(&cfg).unwrap();
        let x = AntennaPositions::equally_spaced(&cfg);
        let phi = unit_phases(16, 6);
        let base = r.assemble(x.as_slice(), &phi).unwrap();
        let scaled = r.scale_user_links(&[3.5, 3.5]).assemble(x.as_slice(), &phi).unwrap();
        for k in 0..2 {
            let diff = &scaled.h[k] - base.h[k].scale(3.5);
            assert!(diff.norm() <= 1e-12 * scaled.h[k].norm());
        }
    }

    #[test]
    fn wrong_phase_length_is_rejected() {
        let r = sample_scenario(&cfg()).unwrap();
        let err = r.assemble(&[0.0; 8], &unit_phases(15, 0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 16, got: 15, .. }));
        let mut other = cfg();
        other.ris_elements = 9;
        assert!(r.check_dimensions(&other).is_err());
        assert!(r.check_dimensions(&cfg()).is_ok());
    }

    #[test]
    fn equally_spaced_is_feasible() {
        let cfg = cfg();
        let x = AntennaPositions::equally_spaced(&cfg);
        assert!(x.is_feasible(cfg.x_min, cfg.x_max, cfg.min_spacing));
        assert!((x.0[0] - cfg.x_min).abs() < 1e-15 && (x.0[7] - cfg.x_max).abs() < 1e-15);
        let tight = AntennaPositions(vec![0.0, cfg.min_spacing]);
        assert!(tight.is_feasible(-1.0, 1.0, cfg.min_spacing));
        let close = AntennaPositions(vec![0.0, 0.5 * cfg.min_spacing]);
        assert!(!close.is_feasible(-1.0, 1.0, cfg.min_spacing));
    }
}
