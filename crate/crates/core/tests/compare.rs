use benchlens::compare::{compare_metric, compare_suites, instruction_counts, instruction_volume_ratio, CompareError};
use benchlens::dataset::{load_canonical, RunKey};
use benchlens::metrics::{Metric, MetricTable, MetricVector};
use benchlens::stats::box_stats;
use benchlens_testkit as tk;
use benchlens_testkit::Rng;
use proptest::prelude::*;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn published(suite: &str) -> Vec<f64> {
    tk::TABLE1.iter().filter(|r| r.0 == suite).map(|r| r.2).collect()
}

#[test]
fn speed_over_rate_instruction_volume() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/table1/store.csv");
    let store = load_canonical(std::path::Path::new(path)).unwrap();
    for (speed, rate, near) in [("int_speed", "int_rate", 29.0), ("fp_speed", "fp_rate", 19.0)] {
        let oracle = mean(&published(speed)) / mean(&published(rate));
        let got = instruction_volume_ratio(
            &instruction_counts(&store, speed, "CPU-C"),
            &instruction_counts(&store, rate, "CPU-C"),
        )
        .unwrap();
        assert!((got - oracle).abs() < 1e-9 * oracle);
        assert!((got / near - 1.0).abs() < 0.05, "{speed}: {got}");
    }
    let int = mean(&published("int_speed")) / mean(&published("int_rate"));
    let fp = mean(&published("fp_speed")) / mean(&published("fp_rate"));
    assert_eq!(format!("{int:.1} {fp:.1}"), "28.7 19.1");
}

fn suite(name: &str, values: &[(f64, f64)]) -> MetricTable {
    values
        .iter()
        .enumerate()
        .map(|(i, &(ipc, mpki))| {
            (
                RunKey::new(name, format!("w{i}"), "CPU-C"),
                MetricVector::default().with(Metric::Ipc, ipc).with(Metric::L1iMpki, mpki),
            )
        })
        .collect()
}

#[test]
fn zeros_are_excluded_and_counted() {
    let mut t = suite("a", &[(1.0, 0.0), (4.0, 2.0)]);
    t.extend(suite("b", &[(2.0, 1.0), (2.0, 1.0)]));
    let c = compare_suites(&t, "a", "b", "CPU-C").unwrap();
    let mpki = c.get(Metric::L1iMpki).unwrap();
    assert_eq!(mpki.a.excluded, 1);
    assert_eq!(mpki.ratio, 2.0);
    assert_eq!(c.get(Metric::Ipc).unwrap().ratio, 1.0);
}

#[test]
fn all_zero_metric_is_reported_per_metric() {
    let mut t = suite("a", &[(1.0, 0.0)]);
    t.extend(suite("b", &[(2.0, 0.0)]));
    let c = compare_suites(&t, "a", "b", "CPU-C").unwrap();
    assert!(c
        .skipped
        .iter()
        .any(|(m, e)| *m == Metric::L1iMpki && *e == CompareError::NoPositiveValues("L1I$_MPKI")));
    assert!(c.to_markdown().contains("L1I$_MPKI: no positive values"));
    assert!(c.to_svg().starts_with("<svg"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn self_comparison_is_exactly_one(vals in prop::collection::vec((0.01f64..10.0, 0.0f64..100.0), 1..20)) {
        let t = suite("a", &vals);
        let c = compare_suites(&t, "a", "a", "CPU-C").unwrap();
        for m in &c.metrics {
            prop_assert_eq!(m.ratio, 1.0);
        }
    }

    #[test]
    fn ratios_compose(
        a in prop::collection::vec(0.01f64..100.0, 1..15),
        b in prop::collection::vec(0.01f64..100.0, 1..15),
        c in prop::collection::vec(0.01f64..100.0, 1..15),
    ) {
        let ab = compare_metric(Metric::Ipc, &a, &b).unwrap().ratio;
        let bc = compare_metric(Metric::Ipc, &b, &c).unwrap().ratio;
        let ac = compare_metric(Metric::Ipc, &a, &c).unwrap().ratio;
        prop_assert!((ab * bc - ac).abs() <= 1e-12 * ac.max(1.0));
    }

    #[test]
    fn box_stats_ignore_order(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = tk::rng(seed);
        let mut v = tk::random_positive(&mut rng, n);
        let before = box_stats(&v).unwrap();
        for i in (1..n).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(box_stats(&v).unwrap(), before);
        prop_assert!(before.min <= before.q1 && before.q1 <= before.median);
        prop_assert!(before.median <= before.q3 && before.q3 <= before.max);
    }
}
