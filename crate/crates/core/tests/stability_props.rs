use hetjsq_core::stability::*;
use hetjsq_core::{Error, ServerClass, SystemConfig};
use proptest::prelude::*;

fn config(caps: &[f64], weights: &[f64], lambda: f64, mu: f64) -> SystemConfig {
    let total: f64 = weights.iter().sum();
    let classes = caps.iter().zip(weights).map(|(&c, &w)| ServerClass::new(c, w / total)).collect();
    SystemConfig::new(classes, lambda, mu).unwrap()
}

/// `(capacities, weights)` with 1..=4 classes.
fn classes() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|m| {
        (prop::collection::vec(0.1f64..5.0, m), prop::collection::vec(0.05f64..1.0, m))
    })
}

/// `(capacities, servers per class)`; fractions are `n_j / N`.
fn counted_classes() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (1usize..=3).prop_flat_map(|m| {
        (prop::collection::vec(0.1f64..5.0, m), prop::collection::vec(1usize..=5, m))
    })
}

fn counted_config(caps: &[f64], counts: &[usize]) -> (SystemConfig, usize) {
    let n: usize = counts.iter().sum();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    (config(caps, &weights, 0.0, 1.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn subset_condition_matches_limit((caps, weights) in classes(), share in 0.001f64..0.999, mu in 0.5f64..2.0) {
        let probe = config(&caps, &weights, 0.0, mu);
        let lambda = share * static_limit(&probe);
        let cfg = probe.with_arrival_rate(lambda).unwrap();
        let (limit, _) = asymptotic_sq2_limit(&cfg).unwrap();
        prop_assume!((lambda - limit).abs() > 1e-12 * limit);
        prop_assert_eq!(check_subset_condition(&cfg).unwrap(), lambda < limit);
    }
}

proptest! {
    #[test]
    fn splitting_a_class_keeps_the_asymptotic_limit((caps, weights) in classes(), pick in 0usize..4) {
        let cfg = config(&caps, &weights, 0.3, 1.0);
        let j = pick % caps.len();
        let mut caps2 = caps.clone();
        let mut weights2 = weights.clone();
        weights2[j] /= 2.0;
        caps2.push(caps[j]);
        weights2.push(weights2[j]);
        let split = config(&caps2, &weights2, 0.3, 1.0);
        let (a, _) = asymptotic_sq2_limit(&cfg).unwrap();
        let (b, _) = asymptotic_sq2_limit(&split).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn limits_are_nested((caps, counts) in counted_classes()) {
        let (cfg, n) = counted_config(&caps, &counts);
        prop_assume!(n >= 2);
        let asymptotic = asymptotic_sq2_limit(&cfg).unwrap().0;
        let finite = finite_n_limit(&cfg, n).unwrap();
        let stat = static_limit(&cfg);
        prop_assert!(asymptotic <= finite * (1.0 + 1e-12));
        prop_assert!(finite <= stat * (1.0 + 1e-12));
        prop_assert!(asymptotic <= stat * (1.0 + 1e-12));
    }

    #[test]
    fn finite_limit_nonincreasing_along_lattice((caps, counts) in counted_classes()) {
        let (cfg, _) = counted_config(&caps, &counts);
        let base = minimal_server_count(&cfg, 1000).unwrap();
        let mut previous = f64::INFINITY;
        for k in 1..=6 {
            let current = finite_n_limit(&cfg, k * base).unwrap();
            prop_assert!(current <= previous * (1.0 + 1e-12), "k={} {} > {}", k, current, previous);
            previous = current;
        }
    }

    #[test]
    fn homogeneous_limits_coincide(c in 0.1f64..5.0, mu in 0.5f64..3.0, n in 2usize..40) {
        let cfg = config(&[c], &[1.0], 0.1, mu);
        let expected = mu * c;
        prop_assert!((static_limit(&cfg) - expected).abs() < 1e-12 * expected);
        prop_assert!((asymptotic_sq2_limit(&cfg).unwrap().0 - expected).abs() < 1e-12 * expected);
        prop_assert!((finite_n_limit(&cfg, n).unwrap() - expected).abs() < 1e-12 * expected);
    }
}

#[test]
fn finite_limit_approaches_asymptotic_at_large_n() {
    let cfg = config(&[5.0 / 3.0, 1.0 / 3.0], &[0.9, 0.1], 0.1, 1.0);
    let asymptotic = asymptotic_sq2_limit(&cfg).unwrap().0;
    assert_eq!(minimal_server_count(&cfg, 1000), Some(10));
    let mut previous = f64::INFINITY;
    for n in [10, 100, 1000, 10_000] {
        let finite = finite_n_limit(&cfg, n).unwrap();
        assert!(finite >= asymptotic && finite <= previous);
        previous = finite;
    }
    assert!((previous - asymptotic) / asymptotic < 2e-3, "{previous} vs {asymptotic}");
}

#[test]
fn reference_thresholds() {
    let fig2 = config(&[5.0 / 3.0, 1.0 / 3.0], &[0.5, 0.5], 0.5, 1.0);
    let (limit, subset) = asymptotic_sq2_limit(&fig2).unwrap();
    assert!((limit - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(subset, vec![1]);
    assert!(check_subset_condition(&fig2).unwrap());
    assert!(!check_subset_condition(&fig2.with_arrival_rate(0.7).unwrap()).unwrap());
    assert!((static_limit(&fig2) - 1.0).abs() < 1e-12);
    assert!((finite_n_limit(&fig2, 4).unwrap() - 1.0).abs() < 1e-12);

    let fig1 = config(&[4.0 / 3.0, 2.0 / 3.0], &[0.5, 0.5], 0.5, 1.0);
    let (limit, subset) = asymptotic_sq2_limit(&fig1).unwrap();
    assert!((limit - 1.0).abs() < 1e-12);
    assert_eq!(subset, vec![0, 1]);
    assert!((static_limit(&config(&[2.0], &[1.0], 0.0, 3.0)) - 6.0).abs() < 1e-12);
}

#[test]
fn enumeration_limits() {
    let cfg = config(&[1.0, 0.5], &[0.5, 0.5], 0.1, 1.0);
    assert!(matches!(finite_n_limit(&cfg, 3), Err(Error::NonIntegerClassSizes { .. })));
    assert!(matches!(finite_n_limit(&cfg, 20_000), Err(Error::TooManyCombinations { .. })));
    let many: Vec<f64> = (0..25).map(|i| 1.0 + i as f64).collect();
    let big = config(&many, &[1.0; 25], 0.1, 1.0);
    assert!(matches!(asymptotic_sq2_limit(&big), Err(Error::TooManyClasses { .. })));
}
