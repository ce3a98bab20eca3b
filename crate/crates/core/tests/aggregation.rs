mod oracles;

use proptest::prelude::*;
use rand::Rng;
use seqreject::aggregation::{aggregate, aggregate_adaptive, aggregate_fixed};
use seqreject::AggregationConfig;

use oracles::rng;

/// Fraction of values at or below `u`.
fn empirical_cdf(values: &[f64], u: f64) -> f64 {
    values.iter().filter(|&&v| v <= u).count() as f64 / values.len() as f64
}

fn pvalues() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![4 => 0.0..1.0f64, 1 => Just(1.0)], 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fixed_rejects_exactly_when_enough_splits_are_small(
        p in pvalues(),
        alpha in 0.001..0.5f64,
        gamma in 0.01..1.0f64,
    ) {
        let q = aggregate_fixed(&p, gamma).unwrap();
        let by_quantile = q <= alpha;
        let by_count = empirical_cdf(&p, alpha * gamma) >= gamma;
        prop_assert_eq!(by_quantile, by_count, "q={} gamma={} alpha={}", q, gamma, alpha);
    }

    #[test]
    fn raising_one_value_never_lowers_the_aggregate(
        p in pvalues(),
        index in any::<prop::sample::Index>(),
        bump in 0.0..1.0f64,
        gamma in 0.05..1.0f64,
    ) {
        let mut raised = p.clone();
        let i = index.index(p.len());
        raised[i] = (raised[i] + bump).min(1.0);
        prop_assert!(aggregate_fixed(&raised, gamma).unwrap() >= aggregate_fixed(&p, gamma).unwrap());
        prop_assert!(aggregate_adaptive(&raised, 0.05, 0.025).unwrap() >= aggregate_adaptive(&p, 0.05, 0.025).unwrap());
    }

    #[test]
    fn aggregates_are_probabilities(p in pvalues()) {
        for config in [AggregationConfig::Fixed { gamma: 0.5 }, AggregationConfig::default()] {
            let q = aggregate(&p, &config).unwrap();
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }
}

/// Rejection rate at level 0.05 when every split p-value is an iid uniform
/// scaled by `m0`.
fn null_rate(config: &AggregationConfig, m0: f64, replicates: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut hits = 0;
    for _ in 0..replicates {
        let p: Vec<f64> = (0..50).map(|_| (m0 * r.random::<f64>()).min(1.0)).collect();
        hits += (aggregate(&p, config).unwrap() <= 0.05) as usize;
    }
    hits as f64 / replicates as f64
}

#[test]
fn aggregated_null_pvalues_keep_the_level() {
    let replicates = 20_000;
    for (k, config) in [AggregationConfig::Fixed { gamma: 0.5 }, AggregationConfig::default()].iter().enumerate() {
        for (i, &m0) in [1.0, 5.0, 20.0].iter().enumerate() {
            let bound = 0.05 / m0;
            let se = (bound * (1.0 - bound) / replicates as f64).sqrt();
            let rate = null_rate(config, m0, replicates, 40 + (k * 3 + i) as u64);
            assert!(rate <= bound + 3.0 * se, "{config:?} m0={m0}: {rate}");
        }
    }
}
