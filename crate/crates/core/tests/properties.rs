use proptest::prelude::*;

use rsma_core::beamformer::{block_objective, solve_beamforming, BeamformerOptions, MultiplierState};
use rsma_core::config::SystemConfig;
use rsma_core::fp::{eval_psi, eval_t, sum_psi, t_values, update_aux};
use rsma_core::ma::{optimize_positions, project_layout, CommonCoupling, MaOptions, Region};
use rsma_core::rates::{allocate_common_rate, user_rates};
use rsma_core::ris::{build_quadratic_forms, dual_ascent_ris, lagrangian, mm_phase_update, DualState, RisOptions};
use rsma_core::channel::PositionModel;
use rsma_core::seed::trial_seed;
use rsma_oracles::fixtures::{random_instance, Instance};

fn small_config() -> impl Strategy<Value = SystemConfig> {
    (1usize..=5, 1usize..=3, 1usize..=6, 1usize..=3, 0.0f64..40.0).prop_map(|(m, k, n, l, dbm)| {
        let mut cfg = SystemConfig::default().with_users(k).with_power_dbm(dbm);
        cfg.antennas = m;
        cfg.ris_elements = n;
        cfg.paths_tx = l;
        cfg.paths_rx = l;
        cfg
    })
}

fn instance() -> impl Strategy<Value = Instance> {
    (small_config(), any::<u64>()).prop_map(|(cfg, seed)| random_instance(&cfg, seed))
}

fn region(cfg: &SystemConfig) -> Region {
    Region { x_min: cfg.x_min, x_max: cfg.x_max, min_spacing: cfg.min_spacing }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surrogates_are_tight_after_aux_update(inst in instance()) {
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let (private, common) = user_rates(&ch, &inst.w, &inst.noise);
        for k in 0..inst.cfg.users {
            let psi = eval_psi(k, &aux, &inst.w, &ch.h[k], 1.0).value();
            let t = eval_t(k, &aux, &inst.w, &ch.h[k], 1.0);
            prop_assert!((psi - private[k]).abs() <= 1e-9 * private[k].max(1.0));
            prop_assert!((t - common[k]).abs() <= 1e-9 * common[k].max(1.0));
        }
    }

    #[test]
    fn surrogates_lower_bound_rates(inst in instance(), other in any::<u64>()) {
        // Auxiliaries fitted at one beamformer bound the rates at another.
        let ch = inst.channel();
        let donor = random_instance(&inst.cfg, other);
        let aux = update_aux(&donor.w, &ch.h, &inst.noise);
        let (private, common) = user_rates(&ch, &inst.w, &inst.noise);
        for k in 0..inst.cfg.users {
            prop_assert!(eval_psi(k, &aux, &inst.w, &ch.h[k], 1.0).value() <= private[k] + 1e-9);
            prop_assert!(eval_t(k, &aux, &inst.w, &ch.h[k], 1.0) <= common[k] + 1e-9);
        }
    }

    #[test]
    fn quadratic_forms_match_direct_evaluation(inst in instance(), seed in any::<u64>()) {
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let forms = build_quadratic_forms(&aux, &inst.w, &ch, &inst.noise);
        let phi = rsma_core::solver::random_phases(inst.cfg.ris_elements, seed);
        let moved = inst.real.assemble(inst.x.as_slice(), &phi).unwrap();
        let direct = sum_psi(&aux, &inst.w, &moved.h, &inst.noise);
        prop_assert!((forms.objective(&phi) - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        for (k, t) in t_values(&aux, &inst.w, &moved.h, &inst.noise).into_iter().enumerate() {
            prop_assert!((forms.t_value(k, &phi) - t).abs() <= 1e-9 * t.abs().max(1.0));
        }
    }

    #[test]
    fn mm_step_never_raises_the_lagrangian(inst in instance(), xi in prop::collection::vec(0.0f64..5.0, 3), s in 0.0f64..2.0) {
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let forms = build_quadratic_forms(&aux, &inst.w, &ch, &inst.noise);
        let xi = &xi[..inst.cfg.users];
        let before = lagrangian(&forms, &inst.phi, xi, s);
        let next = mm_phase_update(&forms, xi, &inst.phi);
        prop_assert!(next.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        prop_assert!(lagrangian(&forms, &next, xi, s) <= before + 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn ris_dual_ascent_returns_unit_modulus(inst in instance()) {
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let forms = build_quadratic_forms(&aux, &inst.w, &ch, &inst.noise);
        let s = allocate_common_rate(&user_rates(&ch, &inst.w, &inst.noise).1).iter().sum();
        let opts = RisOptions { max_iter: 50, ..RisOptions::default() };
        let out = dual_ascent_ris(&forms, s, &inst.phi, &DualState::new(inst.cfg.users, opts.tau), &opts);
        prop_assert!(out.phi.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        prop_assert!(out.dual.xi.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn beamformer_respects_budget_and_improves(inst in instance(), rsma in any::<bool>()) {
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let mut entry = inst.w.clone();
        if !rsma {
            entry.0.column_mut(inst.cfg.users).fill(rsma_core::Complex64::new(0.0, 0.0));
        }
        let out = solve_beamforming(&aux, &ch.h, &inst.noise, inst.cfg.power, &entry, &MultiplierState::new(inst.cfg.users), rsma, &BeamformerOptions::default()).unwrap();
        prop_assert!(out.w.power() <= inst.cfg.power * (1.0 + 1e-9));
        let lambda = &out.multipliers.lambda;
        prop_assert!(lambda.iter().all(|&l| l >= 0.0));
        prop_assert!((lambda.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let before = block_objective(&aux, &entry, &ch.h, &inst.noise, rsma);
        let after = block_objective(&aux, &out.w, &ch.h, &inst.noise, rsma);
        prop_assert!(after >= before - 1e-9 * before.abs().max(1.0));
        if !rsma {
            prop_assert_eq!(out.w.common().norm(), 0.0);
        }
    }

    #[test]
    fn layout_projection_is_feasible(inst in instance(), raw in prop::collection::vec(-2.0f64..2.0, 5)) {
        let cfg = &inst.cfg;
        let x: Vec<f64> = raw[..cfg.antennas].to_vec();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let p = project_layout(&x, &order, &region(cfg));
        prop_assert!(p.is_feasible(cfg.x_min, cfg.x_max, cfg.min_spacing));
        // Feasible points are fixed.
        let again = project_layout(inst.x.as_slice(), &(0..cfg.antennas).collect::<Vec<_>>(), &region(cfg));
        for (a, b) in again.0.iter().zip(&inst.x.0) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn position_ascent_is_feasible_and_monotone(inst in instance()) {
        let cfg = &inst.cfg;
        let ch = inst.channel();
        let aux = update_aux(&inst.w, &ch.h, &inst.noise);
        let model = PositionModel::new(&inst.real, &inst.phi).unwrap();
        let opts = MaOptions { max_iter: 20, ..MaOptions::for_wavelength(cfg.wavelength) };
        let out = optimize_positions(&inst.x, &aux, &inst.w, &model, &inst.noise, &region(cfg), CommonCoupling::Fixed(aux.y), &opts);
        prop_assert!(out.x.is_feasible(cfg.x_min, cfg.x_max, cfg.min_spacing));
        prop_assert!(out.history.windows(2).all(|p| p[1] >= p[0] - 1e-9));
        let moved = model.channels(out.x.as_slice());
        prop_assert!(t_values(&aux, &inst.w, &moved, &inst.noise).iter().all(|&t| t >= aux.y - 1e-12));
    }

    #[test]
    fn common_split_is_feasible(rates in prop::collection::vec(-1.0f64..10.0, 1..12)) {
        let split = allocate_common_rate(&rates);
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(split.iter().all(|&r| r >= 0.0));
        prop_assert!(split.iter().sum::<f64>() <= min.max(0.0) + 1e-12);
    }

    #[test]
    fn trial_seeds_do_not_depend_on_trial_count(master in any::<u64>(), n in 1u64..64) {
        let short: Vec<u64> = (0..n).map(|i| trial_seed(master, i)).collect();
        let long: Vec<u64> = (0..2 * n).map(|i| trial_seed(master, i)).collect();
        prop_assert_eq!(&short[..], &long[..n as usize]);
    }
}
