use rsma_core::config::SystemConfig;
use rsma_core::fp::update_aux;
use rsma_core::seed::trial_seed;
use rsma_core::CVec;
use rsma_oracles::beamforming::certify;
use rsma_oracles::dense::{from_cvec, mat_vec, solve};
use rsma_oracles::fixtures::random_instance;
use rsma_oracles::gradient::{central_difference, psi_sum_at};
use rsma_oracles::phase_grid::{grid_minimum, lagrangian};
use rsma_oracles::surrogate::{block_value, power, Streams};
use rsma_oracles::surrogate::{common_sinr, common_surrogate, private_sinr, psi};

fn small() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.antennas = 3;
    cfg.ris_elements = 3;
    cfg
}

fn streams(w: &rsma_core::rates::BeamformingMatrix) -> Streams {
    (0..w.0.ncols()).map(|j| w.0.column(j).iter().copied().collect()).collect()
}

#[test]
fn elimination_solves_random_systems() {
    let inst = random_instance(&small(), 1);
    let ch = inst.channel();
    let a: Vec<Vec<_>> = (0..3).map(|i| from_cvec(&ch.h[i % 2]).iter().map(|z| z * (1.0 + i as f64)).collect()).collect();
    let mut a = a;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += rsma_core::Complex64::new(5.0, 0.0);
    }
    let b = from_cvec(&ch.h[0]);
    let x = solve(a.clone(), b.clone()).unwrap();
    for (got, want) in mat_vec(&a, &x).iter().zip(&b) {
        assert!((got - want).norm() < 1e-12);
    }
}

#[test]
fn surrogates_touch_the_rates_at_their_own_point() {
    let inst = random_instance(&small(), 2);
    let ch = inst.channel();
    let aux = update_aux(&inst.w, &ch.h, &inst.noise);
    let w = streams(&inst.w);
    for (k, h) in ch.h.iter().enumerate() {
        let h = from_cvec(h);
        assert!((psi(k, &aux, &h, &w, 1.0) - (1.0 + private_sinr(k, &h, &w, 1.0)).ln()).abs() < 1e-12);
        assert!((common_surrogate(k, &aux, &h, &w, 1.0) - (1.0 + common_sinr(&h, &w, 1.0)).ln()).abs() < 1e-12);
    }
}

#[test]
fn dual_certificate_brackets_the_block_optimum() {
    for i in 0..5 {
        let inst = random_instance(&small(), trial_seed(3, i));
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let hs: Vec<_> = ch.h.iter().map(from_cvec).collect();
        let cert = certify(&aux, &hs, &inst.noise, inst.cfg.power);
        let entry = block_value(&aux, &hs, &streams(&inst.w), &inst.noise);
        assert!(cert.lower <= cert.upper + 1e-9);
        assert!(entry <= cert.upper + 1e-9);
        assert!(cert.upper - cert.lower <= 1e-6 * cert.upper.abs().max(1.0), "{} {}", cert.upper, cert.lower);
        assert!((cert.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(power(&streams(&inst.w)) <= inst.cfg.power * (1.0 + 1e-12));
    }
}

#[test]
fn grid_search_beats_every_grid_point() {
    let inst = random_instance(&small(), 4);
    let ch = inst.channel();
    let aux = update_aux(&inst.w, &ch.h, &inst.noise);
    let w = streams(&inst.w);
    let x = inst.x.as_slice();
    let xi = vec![0.3, 0.7];
    let (best, phi) = grid_minimum(&inst.real, x, &aux, &w, &inst.noise, &xi, 0.5, 4);
    assert!((lagrangian(&inst.real, x, &phi, &aux, &w, &inst.noise, &xi, 0.5) - best).abs() < 1e-12);
    let ones = CVec::from_element(3, rsma_core::Complex64::new(1.0, 0.0));
    assert!(best <= lagrangian(&inst.real, x, &ones, &aux, &w, &inst.noise, &xi, 0.5));
}

#[test]
fn central_differences_are_consistent_with_the_objective() {
    let inst = random_instance(&small(), 5);
    let ch = inst.channel();
    let aux = update_aux(&inst.w, &ch.h, &inst.noise);
    let w = streams(&inst.w);
    let x = inst.x.as_slice();
    let step = 1e-6 * inst.cfg.wavelength;
    let g = central_difference(&inst.real, x, &inst.phi, &aux, &w, &inst.noise, step);
    // A first-order prediction along the difference gradient matches a
    // small move.
    let t = 1e-4 * inst.cfg.wavelength / g.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    let moved: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
    let gain = psi_sum_at(&inst.real, &moved, &inst.phi, &aux, &w, &inst.noise)
        - psi_sum_at(&inst.real, x, &inst.phi, &aux, &w, &inst.noise);
    let predicted = t * g.iter().map(|v| v * v).sum::<f64>();
    assert!((gain - predicted).abs() <= 1e-2 * predicted, "{gain} vs {predicted}");
}
