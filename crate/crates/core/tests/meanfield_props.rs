use hetjsq_core::meanfield::*;
use hetjsq_core::stability::asymptotic_sq2_limit;
use hetjsq_core::{Error, ServerClass, SystemConfig, TailFamily, TailVector};
use proptest::prelude::*;

fn config(caps: &[f64], weights: &[f64], lambda: f64) -> SystemConfig {
    let total: f64 = weights.iter().sum();
    let classes = caps.iter().zip(weights).map(|(&c, &w)| ServerClass::new(c, w / total)).collect();
    SystemConfig::new(classes, lambda, 1.0).unwrap()
}

/// A stable config with 1..=3 classes at `share` of the asymptotic limit.
fn stable() -> impl Strategy<Value = SystemConfig> {
    (1usize..=3)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(0.2f64..3.0, m),
                prop::collection::vec(0.1f64..1.0, m),
                0.05f64..0.95,
            )
        })
        .prop_map(|(caps, weights, share)| {
            let probe = config(&caps, &weights, 0.0);
            let limit = asymptotic_sq2_limit(&probe).unwrap().0;
            probe.with_arrival_rate(share * limit).unwrap()
        })
}

fn table_one(lambda: f64) -> SystemConfig {
    config(&[4.0 / 3.0, 2.0 / 3.0], &[0.5, 0.5], lambda)
}

fn assert_certified(cfg: &SystemConfig, eq: &EquilibriumResult) {
    let state = MeanFieldState::from_family(&eq.tails);
    let h = drift(&state, cfg).unwrap().sup_norm();
    assert!(h <= 1e-10, "drift {h}");
    assert!(consistency_residual(&eq.tails, cfg).unwrap() <= 1e-10);
    assert!(recurrence_residual(&eq.tails, cfg).unwrap() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_equilibria_certify(cfg in stable()) {
        let eq = fixed_point(&cfg).unwrap();
        assert_certified(&cfg, &eq);
        let joins: f64 = class_join_probabilities(&eq.tails, &cfg).iter().sum();
        prop_assert!((joins - 1.0).abs() < 1e-9);
        if cfg.num_classes() == 2 {
            let relax = FixedPointOptions { method: Some(EquilibriumMethod::OdeRelaxation), ..Default::default() };
            let other = fixed_point_with(&cfg, &relax).unwrap();
            prop_assert!(sup_distance(&eq.tails, &other.tails) <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn detailed_balance(cfg in stable()) {
        let eq = fixed_point(&cfg).unwrap();
        let p = &eq.tails;
        for k in 0..20 {
            let rate = state_dependent_rate(p, &cfg, k).unwrap();
            for j in 0..cfg.num_classes() {
                let lhs = p.get(j, k + 1) - p.get(j, k + 2);
                let rhs = rate / (cfg.mu() * cfg.capacity(j)) * (p.get(j, k) - p.get(j, k + 1));
                prop_assert!((lhs - rhs).abs() < 1e-10, "k={} j={} {} vs {}", k, j, lhs, rhs);
            }
        }
    }

    #[test]
    fn doubly_exponential_decay(cfg in stable()) {
        let eq = fixed_point(&cfg).unwrap();
        let p = &eq.tails;
        let m = cfg.num_classes();
        let peak = |k: usize| (0..m).map(|j| p.get(j, k)).fold(0.0, f64::max);
        let ratio = (0..m).map(|j| cfg.nu(j) / cfg.fraction(j)).fold(0.0, f64::max);
        let k0 = (0..p.truncation()).find(|&k| peak(k) * ratio < 1.0).unwrap();
        let delta = peak(k0) * ratio;
        for n in 0..(p.truncation() - k0).min(10) {
            let bound = delta.powf(2f64.powi(n as i32) - 1.0) * peak(k0);
            prop_assert!(peak(k0 + n) <= bound * (1.0 + 1e-9) + 1e-300, "n={}", n);
        }
    }
}

#[test]
fn homogeneous_oracle() {
    for lambda in [0.1, 0.5, 0.9, 0.99] {
        let cfg = config(&[1.0], &[1.0], lambda);
        let eq = fixed_point(&cfg).unwrap();
        for k in 0..=10 {
            let exact = lambda.powf(2f64.powi(k) - 1.0);
            assert!((eq.tails.get(0, k as usize) - exact).abs() < 1e-10);
        }
        // the ODE route must land on the same point
        let relax = FixedPointOptions { method: Some(EquilibriumMethod::OdeRelaxation), ..Default::default() };
        let other = fixed_point_with(&cfg, &relax).unwrap();
        assert!(sup_distance(&eq.tails, &other.tails) < 1e-9);
    }
}

#[test]
fn identical_classes_reduce_to_homogeneous() {
    let cfg = config(&[1.0, 1.0], &[0.5, 0.5], 0.9);
    let eq = fixed_point(&cfg).unwrap();
    assert_eq!(eq.method, EquilibriumMethod::ShootingM2);
    assert!((eq.alpha.unwrap() - 0.9).abs() < 1e-9);
    for k in 0..=10 {
        let exact = 0.9f64.powf(2f64.powi(k) - 1.0);
        for j in 0..2 {
            assert!((eq.tails.get(j, k as usize) - exact).abs() < 1e-10);
        }
    }
    let joins = class_join_probabilities(&eq.tails, &cfg);
    assert!((joins[0] - 0.5).abs() < 1e-9 && (joins[1] - 0.5).abs() < 1e-9);
}

#[test]
fn faster_class_gets_more_jobs() {
    let cfg = table_one(0.5);
    let eq = fixed_point(&cfg).unwrap();
    let joins = class_join_probabilities(&eq.tails, &cfg);
    assert!(joins[0] > joins[1]);
    assert!((joins[0] + joins[1] - 1.0).abs() < 1e-10);
}

#[test]
fn perturbation_is_detected() {
    let cfg = table_one(0.5);
    let eq = fixed_point(&cfg).unwrap();
    let mut rows: Vec<Vec<f64>> = eq.tails.classes().iter().map(|t| t.values().to_vec()).collect();
    rows[0][1] += 1e-3;
    let bumped = TailFamily::new(rows.into_iter().map(|r| TailVector::new(r).unwrap()).collect()).unwrap();
    assert!(consistency_residual(&bumped, &cfg).unwrap() >= 1e-4);
}

#[test]
fn ode_from_empty_is_monotone_and_converges() {
    let cfg = table_one(0.7);
    let options = IntegrateOptions { record_interval: Some(0.5), ..Default::default() };
    let traj = integrate(&MeanFieldState::empty(2, 64), &cfg, options).unwrap();
    let fractions = [0.5, 0.5];
    let occupancy: Vec<f64> = traj.states.iter().map(|s| s.mean_occupancy(&fractions)).collect();
    assert!(occupancy.len() > 10);
    assert!(occupancy.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let eq = fixed_point(&cfg).unwrap();
    let limit: f64 = (0..2).map(|j| 0.5 * eq.tails.class(j).mean()).sum();
    assert!((occupancy.last().unwrap() - limit).abs() < 1e-9);
}

#[test]
fn equilibrium_is_stationary_under_the_ode() {
    let cfg = table_one(0.8);
    let eq = fixed_point(&cfg).unwrap();
    let start = MeanFieldState::from_family(&eq.tails);
    let options = IntegrateOptions { horizon: Horizon::Fixed(50.0), record_interval: None };
    let traj = integrate(&start, &cfg, options).unwrap();
    assert!(sup_distance(&eq.tails, &traj.last().to_family_with_tolerance(1.0).unwrap()) < 1e-9);
}

#[test]
fn outside_the_region_mass_escapes() {
    let cfg = config(&[5.0 / 3.0, 1.0 / 3.0], &[0.5, 0.5], 0.9);
    assert!(matches!(fixed_point(&cfg), Err(Error::UnstableRegime { .. })));
    let options = IntegrateOptions {
        horizon: Horizon::UntilEquilibrium { max_time: 2000.0, tolerance: 1e-11 },
        record_interval: None,
    };
    assert!(matches!(
        integrate(&MeanFieldState::empty(2, 64), &cfg, options),
        Err(Error::NoConvergence { .. })
    ));
    // slow-class mass keeps growing
    let mut previous = 0.0;
    for t in [50.0, 100.0, 200.0] {
        let options = IntegrateOptions { horizon: Horizon::Fixed(t), record_interval: None };
        let traj = integrate(&MeanFieldState::empty(2, 64), &cfg, options).unwrap();
        let mass: f64 = traj.last().class(1).iter().skip(1).sum();
        assert!(mass > previous);
        previous = mass;
    }
}

#[test]
fn table_one_half_load_close_to_tabulated() {
    // the tabulated 1.4547 sits 0.0037 above the computed equilibrium
    let cfg = table_one(0.5);
    let t = mean_sojourn_from_tails(&fixed_point(&cfg).unwrap().tails, &cfg).unwrap();
    assert!((t - 1.45104).abs() < 1e-5, "{t}");
    assert!((t - 1.4547).abs() < 5e-3);
}
