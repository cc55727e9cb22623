use std::collections::BTreeMap;

use benchlens::cluster::{build_dendrogram, Linkage};
use benchlens::subset::{
    evaluate_subset, oracle_best_subset, select_representatives, ScoreTable, SubsetError,
};
use benchlens::{Matrix, Matrix64, ScoreTable64};
use benchlens_testkit as tk;
use benchlens_testkit::Rng;
use proptest::prelude::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:02}")).collect()
}

fn table(scores: &[Vec<f64>]) -> ScoreTable64 {
    let n = scores[0].len();
    let machines: Vec<String> = (0..scores.len()).map(|m| format!("m{m}")).collect();
    let map: BTreeMap<(String, String), f64> = scores
        .iter()
        .enumerate()
        .flat_map(|(m, row)| row.iter().enumerate().map(move |(w, &s)| ((format!("m{m}"), format!("w{w:02}")), s)))
        .collect();
    ScoreTable::new("s", &names(n), &machines, &map).unwrap()
}

#[test]
fn two_and_eight_against_two_is_half() {
    let t = table(&[vec![2.0, 8.0]]);
    let r = evaluate_subset(&t, &["w00".to_string()], None).unwrap();
    assert_eq!(r.per_machine[0].1, 0.5);
    assert_eq!(r.aggregate, Some(0.5));
}

#[test]
fn full_suite_is_exactly_one() {
    let mut rng = tk::rng(31);
    for _ in 0..1000 {
        let n = rng.random_range(1..=30);
        let m = rng.random_range(1..=4);
        let scores: Vec<Vec<f64>> = (0..m).map(|_| tk::random_positive(&mut rng, n)).collect();
        let r = evaluate_subset(&table(&scores), &names(n), None).unwrap();
        assert!(r.per_machine.iter().all(|(_, a)| *a == 1.0));
        assert_eq!(r.aggregate, Some(1.0));
    }
}

#[test]
fn accuracy_matches_direct_formula() {
    let mut rng = tk::rng(32);
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let scores = tk::random_positive(&mut rng, n);
        let k = rng.random_range(1..=n);
        let subset: Vec<usize> = tk::all_subsets(n, k).swap_remove(0);
        let chosen: Vec<String> = subset.iter().map(|&i| format!("w{i:02}")).collect();
        let r = evaluate_subset(&table(std::slice::from_ref(&scores)), &chosen, None).unwrap();
        let want = tk::subset_accuracy(&scores, &subset);
        assert!((r.per_machine[0].1 - want).abs() < 1e-12);
    }
}

#[test]
fn oracle_search_matches_recursive_enumeration() {
    let mut rng = tk::rng(33);
    for _ in 0..40 {
        let n = rng.random_range(2..=9);
        let m = rng.random_range(1..=3);
        let k = rng.random_range(1..=n);
        let scores: Vec<Vec<f64>> = (0..m).map(|_| tk::random_positive(&mut rng, n)).collect();
        let best = oracle_best_subset(&table(&scores), k, 1_000_000).unwrap();
        let want = tk::best_subset_accuracy(&scores, k);
        assert!((best.aggregate.unwrap_or(0.0) - want).abs() < 1e-12);
        assert_eq!(best.subset.len(), k);
    }
}

#[test]
fn oracle_respects_budget() {
    let scores = vec![vec![1.0; 30]];
    let err = oracle_best_subset(&table(&scores), 15, 1000).unwrap_err();
    assert!(matches!(err, SubsetError::BudgetExceeded { combinations: 155_117_520, budget: 1000 }));
}

#[test]
fn runtime_fraction_is_share_of_wallclock() {
    let t = table(&[vec![1.0, 2.0, 4.0]]);
    let wall: BTreeMap<String, f64> = [("w00", 10.0), ("w01", 30.0), ("w02", 60.0)]
        .into_iter()
        .map(|(w, s)| (w.to_string(), s))
        .collect();
    let r = evaluate_subset(&t, &["w01".to_string()], Some(&wall)).unwrap();
    assert!((r.runtime_fraction.unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn errors() {
    let t = table(&[vec![1.0, 2.0]]);
    assert_eq!(evaluate_subset(&t, &[], None).unwrap_err(), SubsetError::EmptySubset);
    assert_eq!(
        evaluate_subset(&t, &["nope".to_string()], None).unwrap_err(),
        SubsetError::UnknownWorkload("nope".into())
    );
    assert!(matches!(
        ScoreTable::single("s", "m", &[("a", 0.0_f64)]),
        Err(SubsetError::NonPositiveScore { .. })
    ));
}

/// One representative per planted cluster, never better than the exhaustive best.
#[test]
fn planted_clusters_yield_one_representative_each() {
    let mut rng = tk::rng(34);
    for trial in 0..100 {
        let g = rng.random_range(2..=5);
        let sizes: Vec<usize> = (0..g).map(|_| rng.random_range(1..=4)).collect();
        let (rows, planted) = tk::planted_clusters(&mut rng, &sizes, 4, 10.0);
        let n = rows.len();
        let x: Matrix64 = Matrix::from_rows(&rows);
        let d = build_dendrogram(&x, &names(n), Linkage::Ward).unwrap();
        let scores: Vec<Vec<f64>> = (0..2).map(|_| tk::random_positive(&mut rng, n)).collect();
        let t = table(&scores);
        let sel = select_representatives(&d, &x, g, &t, None).unwrap();
        let mut seen: Vec<usize> = sel
            .cut
            .medoids
            .iter()
            .map(|w| planted[w[1..].parse::<usize>().unwrap()])
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..g).collect::<Vec<_>>(), "trial {trial}");
        let best = oracle_best_subset(&t, g, 1_000_000).unwrap();
        assert!(sel.report.objective() <= best.objective());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn accuracy_is_scale_invariant(
        scores in prop::collection::vec(0.01f64..100.0, 2..12),
        c in 0.001f64..1000.0,
        pick in any::<u64>(),
    ) {
        let n = scores.len();
        let subset: Vec<String> = (0..n).filter(|i| (pick >> i) & 1 == 1).map(|i| format!("w{i:02}")).collect();
        prop_assume!(!subset.is_empty());
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        let a = evaluate_subset(&table(&[scores]), &subset, None).unwrap();
        let b = evaluate_subset(&table(&[scaled]), &subset, None).unwrap();
        prop_assert!((a.per_machine[0].1 - b.per_machine[0].1).abs() < 1e-12);
    }

    #[test]
    fn accuracy_never_exceeds_one(scores in prop::collection::vec(0.01f64..100.0, 1..10), pick in any::<u64>()) {
        let n = scores.len();
        let subset: Vec<String> = (0..n).filter(|i| (pick >> i) & 1 == 1).map(|i| format!("w{i:02}")).collect();
        prop_assume!(!subset.is_empty());
        let r = evaluate_subset(&table(&[scores]), &subset, None).unwrap();
        prop_assert!(r.per_machine[0].1 <= 1.0);
    }
}
