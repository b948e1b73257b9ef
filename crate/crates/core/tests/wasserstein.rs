use std::path::PathBuf;

use attrpriv::config::FrameworkConfig;
use attrpriv::wasserstein::{
    conditional_count_distribution, conditional_count_distribution_param, conditional_table, pair_distances,
    w_infinity, worst_case_distance, AffineMapping, BinaryDependenceModel,
};
use attrpriv::DiscreteDistribution;
use proptest::prelude::*;

mod common;
use common::bottleneck;

fn dist(points: &[i32], weights: &[f64]) -> DiscreteDistribution {
    let total: f64 = weights.iter().sum();
    DiscreteDistribution::from_unsorted(
        points.iter().zip(weights).map(|(&x, &w)| (f64::from(x) * 0.5, w / total)).collect(),
    )
    .unwrap()
}

fn distribution() -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::btree_set(-10i32..10, 1..=8).prop_flat_map(|set| {
        let points: Vec<i32> = set.into_iter().collect();
        let k = points.len();
        prop::collection::vec(0.01f64..1.0, k).prop_map(move |w| dist(&points, &w))
    })
}

fn shifted(d: &DiscreteDistribution, c: f64, s: f64) -> DiscreteDistribution {
    DiscreteDistribution::from_unsorted(d.atoms().map(|(x, p)| (s * x + c, p)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn quantile_coupling_matches_bottleneck(mu in distribution(), nu in distribution()) {
        let got = w_infinity(&mu, &nu);
        let want = bottleneck(&mu, &nu);
        prop_assert!((got - want).abs() <= 1e-9, "quantile {got} vs bottleneck {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_axioms(a in distribution(), b in distribution(), c in distribution()) {
        let ab = w_infinity(&a, &b);
        prop_assert!((ab - w_infinity(&b, &a)).abs() <= 1e-12);
        prop_assert_eq!(w_infinity(&a, &a), 0.0);
        prop_assert!(ab <= w_infinity(&a, &c) + w_infinity(&c, &b) + 1e-12);
        if ab == 0.0 {
            prop_assert_eq!(a.points(), b.points());
        }
    }

    #[test]
    fn translation_and_scale_covariance(
        a in distribution(),
        b in distribution(),
        c in -5.0f64..5.0,
        s in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
    ) {
        let base = w_infinity(&a, &b);
        let moved = w_infinity(&shifted(&a, c, 1.0), &shifted(&b, c, 1.0));
        prop_assert!((moved - base).abs() <= 1e-9);
        let stretched = w_infinity(&shifted(&a, 0.0, s), &shifted(&b, 0.0, s));
        prop_assert!((stretched - s.abs() * base).abs() <= 1e-9);
    }
}

/// Distribution of `Σ X_1` by summing over all `2^n` outcomes, with the
/// first `a` records having `X_2 = 1`.
fn enumerate_counts(n: usize, a: usize, p1: f64, p2: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for bits in 0u32..(1 << n) {
        let mut prob = 1.0;
        for r in 0..n {
            let p = if r < a { p1 } else { p2 };
            prob *= if bits & (1 << r) != 0 { p } else { 1.0 - p };
        }
        out[bits.count_ones() as usize] += prob;
    }
    out
}

proptest! {
    #[test]
    fn count_distribution_matches_enumeration(
        n in 1usize..=10,
        frac in 0.0f64..=1.0,
        p1 in 0.0f64..=1.0,
        p2 in 0.0f64..=1.0,
    ) {
        let a = ((n as f64) * frac).round() as usize;
        let model = BinaryDependenceModel::new(n, p1, p2).unwrap();
        let d = conditional_count_distribution(&model, a).unwrap();
        let total: f64 = d.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert_eq!(d.points().to_vec(), (0..=n).map(|k| k as f64).collect::<Vec<_>>());
        for (got, want) in d.probs().iter().zip(enumerate_counts(n, a, p1, p2)) {
            prop_assert!((got - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn independent_records_give_a_binomial() {
    let model = BinaryDependenceModel::new(5, 0.3, 0.3).unwrap();
    let want = enumerate_counts(5, 0, 0.3, 0.3);
    for a in 0..=5 {
        let d = conditional_count_distribution(&model, a).unwrap();
        for (got, w) in d.probs().iter().zip(&want) {
            assert!((got - w).abs() < 1e-12);
        }
    }
    assert!(conditional_count_distribution(&model, 6).is_err());
}

#[test]
fn first_table() {
    let model = BinaryDependenceModel::new(4, 0.4, 0.6).unwrap();
    let none = conditional_count_distribution(&model, 0).unwrap();
    let all = conditional_count_distribution(&model, 4).unwrap();
    let table = [0.0256, 0.1536, 0.3456, 0.3456, 0.1296];
    for j in 0..5 {
        assert!((none.probs()[j] - table[j]).abs() < 1e-4);
        assert!((all.probs()[j] - table[4 - j]).abs() < 1e-4);
    }
    assert_eq!(w_infinity(&none, &all), 1.0);
}

#[test]
fn second_table() {
    let map = AffineMapping { alpha: 0.6, beta: -0.2 };
    let high = conditional_count_distribution_param(4, 0.8, &map).unwrap();
    let low = conditional_count_distribution_param(4, 0.2, &map).unwrap();
    let table = [0.0983, 0.3091, 0.3643, 0.1908, 0.0375];
    for j in 0..5 {
        assert!((high.probs()[j] - table[j]).abs() < 1e-4);
        assert!((low.probs()[j] - table[4 - j]).abs() < 1e-4);
    }
    let half =
        conditional_count_distribution_param(4, 0.5, &AffineMapping { alpha: 0.0, beta: 1.0 }).unwrap();
    for j in 0..5 {
        assert!((half.probs()[j] - half.probs()[4 - j]).abs() < 1e-15);
    }
    assert!(conditional_count_distribution_param(4, 0.8, &AffineMapping { alpha: 0.9, beta: 1.0 }).is_err());
}

fn config(name: &str) -> FrameworkConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    FrameworkConfig::from_path(&path, None).unwrap()
}

fn worst(name: &str) -> f64 {
    let cfg = config(name);
    let table = conditional_table(&cfg.framework, &cfg.query, 4).unwrap();
    worst_case_distance(&pair_distances(&table)).unwrap()
}

#[test]
fn record_classes_grow_monotonically() {
    let ws: Vec<f64> =
        ["pairs_narrow.json", "pairs_wide.json", "pairs_full.json"].iter().map(|n| worst(n)).collect();
    assert_eq!(ws, vec![1.0, 2.0, 4.0]);
}

#[test]
fn parameter_class_distance() {
    assert_eq!(worst("pairs_param.json"), 1.0);
}
