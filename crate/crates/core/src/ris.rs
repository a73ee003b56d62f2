//! RIS phase update.
//!
//! With `h_k^H = φ^H U_k + u_k^H`, the private surrogate sum and every common
//! surrogate are quadratics in `φ`:
//!
//! ```text
//! Σ_k Ψ_k = -φ^H M1 φ + Re{φ^H (M2 - 2 M3)} + c0
//! T_k     = -φ^H N1_k φ + Re{φ^H (N2_k - N3_k)} + d_k
//! ```
//!
//! The common-rate constraints `T_k ≥ Σ_j r_{c,j}` are dualized. For fixed
//! duals `ξ` the Lagrangian is minimized over unit-modulus `φ` by
//! majorize-minimize steps, and `ξ` follows projected gradient ascent.

use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::CompositeChannel;
use crate::fp::AuxiliaryState;
use crate::linalg::{add_outer, hermitian_max_eigenvalue, hermitize, CMat, CVec, Complex64};
use crate::rates::BeamformingMatrix;

#[derive(Debug, Clone)]
pub struct QuadraticForms {
    pub m1: CMat,
    pub m2: CVec,
    pub m3: CVec,
    pub n1: Vec<CMat>,
    pub n2: Vec<CVec>,
    pub n3: Vec<CVec>,
    pub d: Vec<f64>,
    pub c0: f64,
}

fn quad(m: &CMat, phi: &CVec) -> f64 {
    phi.dotc(&(m * phi)).re
}

fn lin(v: &CVec, phi: &CVec) -> f64 {
    phi.dotc(v).re
}

impl QuadraticForms {
    pub fn elements(&self) -> usize {
        self.m2.len()
    }

    pub fn users(&self) -> usize {
        self.d.len()
    }

    /// `Σ_k Ψ_k` at `phi`.
    pub fn objective(&self, phi: &CVec) -> f64 {
        -quad(&self.m1, phi) + lin(&(&self.m2 - self.m3.scale(2.0)), phi) + self.c0
    }

    /// `T_k` at `phi`.
    pub fn t_value(&self, k: usize, phi: &CVec) -> f64 {
        -quad(&self.n1[k], phi) + lin(&(&self.n2[k] - &self.n3[k]), phi) + self.d[k]
    }

    pub fn t_values(&self, phi: &CVec) -> Vec<f64> {
        (0..self.users()).map(|k| self.t_value(k, phi)).collect()
    }

    /// `Q = M1 + Σ_k ξ_k N1_k` and `g = M2 - 2 M3 + Σ_k ξ_k (N2_k - N3_k)`.
    fn lagrangian_terms(&self, xi: &[f64]) -> (CMat, CVec) {
        let mut q = self.m1.clone();
        let mut g = &self.m2 - self.m3.scale(2.0);
        for (k, &x) in xi.iter().enumerate() {
            if x != 0.0 {
                q += self.n1[k].scale(x);
                g += (&self.n2[k] - &self.n3[k]).scale(x);
            }
        }
        (hermitize(&q), g)
    }
}

/// Expands `Σ_k Ψ_k` and each `T_k` in `φ` at fixed beamformers and
/// auxiliaries.
pub fn build_quadratic_forms(
    aux: &AuxiliaryState,
    w: &BeamformingMatrix,
    ch: &CompositeChannel,
    noise: &[f64],
) -> QuadraticForms {
    let users = w.users();
    let n = ch.ris_factor.first().map_or(0, |u| u.nrows());
    let zero = Complex64::new(0.0, 0.0);
    let mut forms = QuadraticForms {
        m1: CMat::zeros(n, n),
        m2: CVec::zeros(n),
        m3: CVec::zeros(n),
        n1: Vec::with_capacity(users),
        n2: Vec::with_capacity(users),
        n3: Vec::with_capacity(users),
        d: Vec::with_capacity(users),
        c0: 0.0,
    };
    for k in 0..users {
        let uk = &ch.ris_factor[k];
        let dk = &ch.direct[k];
        // p_i = U_k w_i, q_i = u_k^H w_i; the common stream is the last column.
        let p: Vec<CVec> = w.0.column_iter().map(|wi| uk * wi).collect();
        let q: Vec<Complex64> = w.0.column_iter().map(|wi| dk.dotc(&wi)).collect();

        let e2 = aux.eps[k].norm_sqr();
        let mu = aux.mu[k];
        let mut private_q = 0.0;
        for i in 0..users {
            add_outer(&mut forms.m1, &p[i], e2);
            forms.m3 += &p[i] * (q[i].conj() * e2);
            private_q += q[i].norm_sqr();
        }
        let a = 2.0 * (1.0 + mu).sqrt();
        forms.m2 += &p[k] * (aux.eps[k].conj() * a);
        forms.c0 += mu.ln_1p() - mu + a * (aux.eps[k].conj() * q[k]).re - e2 * (private_q + noise[k]);

        let v2 = aux.v[k].norm_sqr();
        let gamma = aux.gamma[k];
        let b = 2.0 * (1.0 + gamma).sqrt();
        let mut n1 = CMat::zeros(n, n);
        let mut n3 = CVec::from_element(n, zero);
        for i in 0..=users {
            add_outer(&mut n1, &p[i], v2);
            n3 += &p[i] * (q[i].conj() * (2.0 * v2));
        }
        forms.n1.push(n1);
        forms.n2.push(&p[users] * (aux.v[k].conj() * b));
        forms.n3.push(n3);
        forms.d.push(
            gamma.ln_1p() - gamma + b * (aux.v[k].conj() * q[users]).re
                - v2 * (q[users].norm_sqr() + private_q + noise[k]),
        );
    }
    forms
}

/// Lagrange multipliers of the common-rate constraints and their step size.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub xi: Vec<f64>,
    pub tau: f64,
}

impl DualState {
    pub fn new(users: usize, tau: f64) -> Self {
        DualState { xi: alloc::vec![0.0; users], tau }
    }
}

/// `L(φ, ξ) = φ^H Q φ - Re{φ^H g} + Σ_k ξ_k (s - d_k)` where `s` is the total
/// allocated common rate. Equals `c0 - Σ_k Ψ_k + Σ_k ξ_k (s - T_k)`.
pub fn lagrangian(forms: &QuadraticForms, phi: &CVec, xi: &[f64], s: f64) -> f64 {
    let (q, g) = forms.lagrangian_terms(xi);
    let offset: f64 = xi.iter().zip(&forms.d).map(|(x, d)| x * (s - d)).sum();
    quad(&q, phi) - lin(&g, phi) + offset
}

/// Majorizer of the Lagrangian at fixed duals.
#[derive(Debug, Clone)]
pub struct Majorizer {
    q: CMat,
    g: CVec,
    lambda_max: f64,
}

impl Majorizer {
    pub fn new(forms: &QuadraticForms, xi: &[f64]) -> Self {
        let (q, g) = forms.lagrangian_terms(xi);
        let lambda_max = hermitian_max_eigenvalue(&q);
        Majorizer { q, g, lambda_max }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `h = 2 (Q - λ_max I) φ_prev - g`.
    pub fn linear_term(&self, phi_prev: &CVec) -> CVec {
        let mut h = (&self.q * phi_prev - phi_prev.scale(self.lambda_max)).scale(2.0);
        h -= &self.g;
        h
    }

    /// Minimizes `Re{φ^H h}` over unit-modulus `φ`: `φ_i = -h_i / |h_i|`.
    /// Entries with a vanishing `h_i` keep their previous phase.
    pub fn step(&self, phi_prev: &CVec) -> CVec {
        let h = self.linear_term(phi_prev);
        let scale = 2.0 * self.lambda_max.abs() + self.g.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = 1e-14 * scale;
        CVec::from_fn(h.len(), |i, _| {
            let r = h[i].norm();
            if r <= floor || r == 0.0 {
                phi_prev[i]
            } else {
                -h[i] / r
            }
        })
    }
}

/// One majorize-minimize step on the Lagrangian at duals `xi`.
pub fn mm_phase_update(forms: &QuadraticForms, xi: &[f64], phi_prev: &CVec) -> CVec {
    Majorizer::new(forms, xi).step(phi_prev)
}

/// Repeats MM steps at fixed duals until the largest phase change drops
/// below `tol`.
pub fn minimize_lagrangian(forms: &QuadraticForms, xi: &[f64], phi0: &CVec, tol: f64, max_iter: usize) -> CVec {
    let mm = Majorizer::new(forms, xi);
    let mut phi = phi0.clone();
    for _ in 0..max_iter {
        let next = mm.step(&phi);
        let change = max_change(&next, &phi);
        phi = next;
        if change < tol {
            break;
        }
    }
    phi
}

fn max_change(a: &CVec, b: &CVec) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisOptions {
    /// Initial dual step size.
    pub tau: f64,
    pub max_iter: usize,
    /// Largest per-element phase change counted as converged.
    pub phi_tol: f64,
    /// Largest constraint violation counted as feasible.
    pub violation_tol: f64,
    /// Number of violation increases after which the step size decays as
    /// `τ / sqrt(1 + t)`.
    pub oscillation_limit: usize,
}

impl Default for RisOptions {
    fn default() -> Self {
        RisOptions { tau: 0.01, max_iter: 500, phi_tol: 1e-5, violation_tol: 1e-4, oscillation_limit: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct RisOutcome {
    pub phi: CVec,
    pub dual: DualState,
    /// `Σ_k Ψ_k` at the returned phases.
    pub objective: f64,
    /// `max_k (s - T_k)` at the returned phases.
    pub max_violation: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn violation(forms: &QuadraticForms, phi: &CVec, s: f64) -> Vec<f64> {
    forms.t_values(phi).into_iter().map(|t| s - t).collect()
}

/// Dual ascent over the phases: alternate one MM step with
/// `ξ_k ← [ξ_k + τ (s - T_k(φ))]^+`.
///
/// Returns the best iterate seen: the highest objective among those within
/// the violation tolerance, or the least violating one if none is.
pub fn dual_ascent_ris(
    forms: &QuadraticForms,
    s: f64,
    phi0: &CVec,
    dual0: &DualState,
    opts: &RisOptions,
) -> RisOutcome {
    let mut phi = phi0.clone();
    let mut dual = dual0.clone();
    let tol = opts.violation_tol;

    let score = |phi: &CVec| {
        let v = violation(forms, phi, s).into_iter().fold(f64::NEG_INFINITY, f64::max);
        (forms.objective(phi), v)
    };
    let better = |cand: (f64, f64), best: (f64, f64)| match (cand.1 <= tol, best.1 <= tol) {
        (true, true) => cand.0 > best.0,
        (true, false) => true,
        (false, true) => false,
        (false, false) => cand.1 < best.1,
    };

    let mut best_phi = phi.clone();
    let mut best = score(&phi);
    let mut mm = Majorizer::new(forms, &dual.xi);
    let mut last_violation = f64::INFINITY;
    let mut increases = 0;
    let mut decay_from: Option<usize> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let next = mm.step(&phi);
        let change = max_change(&next, &phi);
        phi = next;

        let viol = violation(forms, &phi, s);
        let worst = viol.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cand = (forms.objective(&phi), worst);
        if better(cand, best) {
            best = cand;
            best_phi = phi.clone();
        }
        if change < opts.phi_tol && worst < tol {
            converged = true;
            break;
        }

        if worst > last_violation {
            increases += 1;
            if increases >= opts.oscillation_limit && decay_from.is_none() {
                decay_from = Some(iterations);
            }
        }
        last_violation = worst;
        let step = match decay_from {
            Some(t0) => dual.tau / ((1 + iterations - t0) as f64).sqrt(),
            None => dual.tau,
        };
        let mut moved = false;
        for (x, v) in dual.xi.iter_mut().zip(&viol) {
            let updated = (*x + step * v).max(0.0);
            moved |= updated != *x;
            *x = updated;
        }
        if moved {
            mm = Majorizer::new(forms, &dual.xi);
        }
    }

    RisOutcome { phi: best_phi, dual, objective: best.0, max_violation: best.1, converged, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_scenario, AntennaPositions};
    use crate::config::SystemConfig;
    use crate::fp::{sum_psi, t_values, update_aux};
    use crate::linalg::{c, cis, hermitian_min_eigenvalue, real};
    use alloc::vec;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        real: crate::channel::ChannelRealization,
        x: AntennaPositions,
        w: BeamformingMatrix,
        aux: AuxiliaryState,
        noise: Vec<f64>,
    }

    fn fixture(n: usize, seed: u64) -> Fixture {
        let cfg = SystemConfig { ris_elements: n, seed, ..SystemConfig::default() };
        let real = sample_scenario(&cfg).unwrap().normalized(&cfg.noise_power);
        let x = AntennaPositions::equally_spaced(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let mut w = BeamformingMatrix(CMat::from_fn(8, 3, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        let p = w.power();
        w.scale((1.0 / p).sqrt());
        let phi0 = random_phases(n, seed + 7);
        let ch = real.assemble(x.as_slice(), &phi0).unwrap();
        let noise = vec![1.0; 2];
        let aux = update_aux(&w, &ch.h, &noise);
        Fixture { real, x, w, aux, noise }
    }

    fn random_phases(n: usize, seed: u64) -> CVec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CVec::from_fn(n, |_, _| cis(rng.gen_range(0.0..2.0 * PI)))
    }

    fn forms_of(f: &Fixture) -> QuadraticForms {
        let ch = f.real.assemble(f.x.as_slice(), &CVec::from_element(f.real.ris_elements(), real(1.0))).unwrap();
        build_quadratic_forms(&f.aux, &f.w, &ch, &f.noise)
    }

    #[test]
    fn forms_reproduce_direct_surrogates() {
        let f = fixture(16, 1);
        let forms = forms_of(&f);
        for s in 0..50 {
            let phi = random_phases(16, s);
            let ch = f.real.assemble(f.x.as_slice(), &phi).unwrap();
            let direct = sum_psi(&f.aux, &f.w, &ch.h, &f.noise);
            assert!((forms.objective(&phi) - direct).abs() < 1e-9);
            let t = t_values(&f.aux, &f.w, &ch.h, &f.noise);
            for k in 0..2 {
                assert!((forms.t_value(k, &phi) - t[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn forms_are_hermitian_psd() {
        let forms = forms_of(&fixture(8, 2));
        for m in core::iter::once(&forms.m1).chain(&forms.n1) {
            assert!((m - m.adjoint()).norm() <= 1e-12 * m.norm().max(1.0));
            assert!(hermitian_min_eigenvalue(m) >= -1e-9 * m.norm().max(1.0));
        }
    }

    #[test]
    fn zero_beamformer_collapses_forms() {
        let mut f = fixture(4, 3);
        f.w = BeamformingMatrix::zeros(8, 2);
        let forms = forms_of(&f);
        assert_eq!(forms.m1.norm() + forms.m2.norm() + forms.m3.norm(), 0.0);
        let expected: f64 = (0..2)
            .map(|k| f.aux.mu[k].ln_1p() - f.aux.mu[k] - f.aux.eps[k].norm_sqr() * f.noise[k])
            .sum();
        assert!((forms.c0 - expected).abs() < 1e-12);
    }

    #[test]
    fn no_ris_path_gives_constant_objective() {
        let mut f = fixture(4, 4);
        f.real = f.real.without_ris();
        let forms = forms_of(&f);
        assert_eq!(forms.m1.norm() + forms.m2.norm() + forms.m3.norm(), 0.0);
    }

    #[test]
    fn flat_majorizer_keeps_phases() {
        let forms = QuadraticForms {
            m1: CMat::identity(3, 3) * real(2.0),
            m2: CVec::zeros(3),
            m3: CVec::zeros(3),
            n1: vec![],
            n2: vec![],
            n3: vec![],
            d: vec![],
            c0: 0.0,
        };
        let phi = random_phases(3, 5);
        assert_eq!(mm_phase_update(&forms, &[], &phi), phi);
    }

    #[test]
    fn mm_steps_never_increase_the_lagrangian() {
        for seed in 0..5 {
            let f = fixture(16, seed);
            let forms = forms_of(&f);
            let xi = [0.3, 1.2];
            let s = 0.5;
            let mut phi = random_phases(16, seed + 40);
            let mut prev = lagrangian(&forms, &phi, &xi, s);
            for _ in 0..50 {
                phi = mm_phase_update(&forms, &xi, &phi);
                let cur = lagrangian(&forms, &phi, &xi, s);
                assert!(cur <= prev + 1e-9, "{cur} > {prev}");
                prev = cur;
                assert!(phi.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn surrogate_majorizes_lagrangian() {
        let f = fixture(16, 8);
        let forms = forms_of(&f);
        let xi = [0.5, 0.1];
        let mm = Majorizer::new(&forms, &xi);
        let anchor = random_phases(16, 1);
        let h = mm.linear_term(&anchor);
        // Constant making the surrogate touch the Lagrangian at the anchor.
        let at = |phi: &CVec| lagrangian(&forms, phi, &xi, 0.0);
        let offset = at(&anchor) - phi_dot(&anchor, &h);
        for s in 0..30 {
            let phi = random_phases(16, 200 + s);
            assert!(phi_dot(&phi, &h) + offset >= at(&phi) - 1e-9);
        }
    }

    fn phi_dot(phi: &CVec, h: &CVec) -> f64 {
        phi.dotc(h).re
    }

    #[test]
    fn single_element_matches_phase_grid() {
        let f = fixture(1, 6);
        let forms = forms_of(&f);
        let xi = [0.2, 0.4];
        let phi = minimize_lagrangian(&forms, &xi, &CVec::from_element(1, real(1.0)), 1e-12, 200);
        let got = lagrangian(&forms, &phi, &xi, 0.0);
        let grid_best = (0..360)
            .map(|d| lagrangian(&forms, &CVec::from_element(1, cis(d as f64 * PI / 180.0)), &xi, 0.0))
            .fold(f64::INFINITY, f64::min);
        assert!(got <= grid_best + 1e-12);
    }

    #[test]
    fn inactive_constraints_keep_duals_at_zero() {
        let f = fixture(16, 9);
        let forms = forms_of(&f);
        let phi0 = CVec::from_element(16, real(1.0));
        let out = dual_ascent_ris(&forms, -100.0, &phi0, &DualState::new(2, 0.01), &RisOptions::default());
        assert_eq!(out.dual.xi, vec![0.0, 0.0]);
        assert!(out.objective >= forms.objective(&phi0));
    }

    #[test]
    fn zero_step_is_plain_mm() {
        let f = fixture(16, 10);
        let forms = forms_of(&f);
        let phi0 = CVec::from_element(16, real(1.0));
        let dual = DualState { xi: vec![0.7, 0.0], tau: 0.0 };
        let out = dual_ascent_ris(&forms, 1e6, &phi0, &dual, &RisOptions::default());
        assert_eq!(out.dual.xi, vec![0.7, 0.0]);
    }

    #[test]
    fn dual_ascent_returns_unit_modulus_and_feasible_start_is_kept_feasible() {
        let f = fixture(16, 11);
        let ch = f.real.assemble(f.x.as_slice(), &CVec::from_element(16, real(1.0))).unwrap();
        let aux = update_aux(&f.w, &ch.h, &f.noise);
        let forms = build_quadratic_forms(&aux, &f.w, &ch, &f.noise);
        let phi0 = CVec::from_element(16, real(1.0));
        let s = forms.t_values(&phi0).into_iter().fold(f64::INFINITY, f64::min);
        let out = dual_ascent_ris(&forms, s, &phi0, &DualState::new(2, 0.01), &RisOptions::default());
        assert!(out.phi.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!(out.max_violation <= 1e-4);
        assert!(out.objective >= forms.objective(&phi0) - 1e-12);
        assert!(out.dual.xi.iter().all(|&x| x >= 0.0));
    }
}
