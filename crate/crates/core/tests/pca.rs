use benchlens::features::FeatureMatrix;
use benchlens::reduce::{fit_pca, PcaError, PcaModel, Retention};
use benchlens::{Matrix, Matrix32, Matrix64, PcaModel64};
use benchlens_testkit as tk;
use proptest::prelude::*;
use benchlens_testkit::Rng;

fn to_matrix(rows: &tk::Rows) -> Matrix64 {
    Matrix::from_rows(rows)
}

fn full_rank(n: usize, d: usize) -> usize {
    (n - 1).min(d)
}

#[test]
fn explained_variance_matches_covariance_eigenvalues() {
    let mut rng = tk::rng(11);
    for trial in 0..50 {
        let n = rng.random_range(3..=20);
        let d = if trial % 5 == 0 { 171 } else { rng.random_range(2..=40) };
        let rows = tk::random_matrix(&mut rng, n, d);
        let k = full_rank(n, d);
        let model = PcaModel64::fit(&to_matrix(&rows), Retention::Components(k)).unwrap();
        let oracle = tk::covariance_eigenvalues(&rows);
        for (i, (got, want)) in model.explained_variance().iter().zip(&oracle).enumerate() {
            assert!((got - want).abs() < 1e-8, "trial {trial} ({n}x{d}) pc {i}: {got} vs {want}");
        }
        let total: f64 = oracle.iter().sum();
        assert!((model.total_variance() - total).abs() < 1e-8);
    }
}

#[test]
fn components_are_orthonormal_and_reconstruct() {
    let mut rng = tk::rng(12);
    for _ in 0..30 {
        let n = rng.random_range(3..=20);
        let d = rng.random_range(2..=60);
        let rows = tk::random_matrix(&mut rng, n, d);
        let x = to_matrix(&rows);
        let k = full_rank(n, d);
        let model = PcaModel64::fit(&x, Retention::Components(k)).unwrap();
        let v = model.components();
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = v.row(i).iter().zip(v.row(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "({i},{j}) = {dot}");
            }
        }
        let back = model.reconstruct(&model.project(&x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-8);
    }
}

#[test]
fn leading_entry_of_each_component_is_positive() {
    let mut rng = tk::rng(13);
    let rows = tk::random_matrix(&mut rng, 12, 9);
    let model = PcaModel64::fit(&to_matrix(&rows), Retention::Components(5)).unwrap();
    for i in 0..5 {
        let row = model.components().row(i);
        let lead = row.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(lead > 0.0);
    }
}

#[test]
fn variance_target_picks_smallest_sufficient_k() {
    let mut rng = tk::rng(14);
    let rows = tk::random_matrix(&mut rng, 15, 10);
    let x = to_matrix(&rows);
    let all = PcaModel64::fit(&x, Retention::Components(10)).unwrap();
    let ratios = all.explained_ratio();
    for target in [0.3, 0.5, 0.8, 0.95, 1.0] {
        let m = PcaModel64::fit(&x, Retention::VarianceTarget(target)).unwrap();
        let cum: f64 = ratios[..m.k()].iter().sum();
        assert!(cum >= target - 1e-12 || m.k() == 10);
        if m.k() > 1 {
            let prev: f64 = ratios[..m.k() - 1].iter().sum();
            assert!(prev < target);
        }
    }
    assert_eq!(
        PcaModel64::fit(&x, Retention::VarianceTarget(0.0)).unwrap_err(),
        PcaError::TargetUnreachable(0.0)
    );
    assert!(matches!(
        PcaModel64::fit(&x, Retention::Components(11)),
        Err(PcaError::InvalidComponentCount { .. })
    ));
}

#[test]
fn fit_requires_normalized_features() {
    let rows = vec![vec![1.0, 2.0], vec![2.0, 5.0], vec![4.0, 1.0]];
    let fm = FeatureMatrix::from_values(vec!["a".into(), "b".into(), "c".into()], to_matrix(&rows)).unwrap();
    assert_eq!(fit_pca(&fm, Retention::Components(1)).unwrap_err(), PcaError::NotNormalized);
    let model = fit_pca(&fm.normalize().unwrap(), Retention::Components(2)).unwrap();
    assert!((model.explained_ratio().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn single_precision_agrees_with_double() {
    let mut rng = tk::rng(15);
    let rows = tk::random_matrix(&mut rng, 10, 6);
    let x64 = to_matrix(&rows);
    let x32: Matrix32 = x64.map(|v| v as f32);
    let m64 = PcaModel64::fit(&x64, Retention::Components(4)).unwrap();
    let m32 = PcaModel::<f32>::fit(&x32, Retention::Components(4)).unwrap();
    for (a, b) in m64.explained_variance().iter().zip(m32.explained_variance()) {
        assert!((a - f64::from(*b)).abs() < 1e-3 * a.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratios_sum_to_one_at_full_rank(seed in any::<u64>(), n in 3usize..12, d in 1usize..12) {
        let mut rng = tk::rng(seed);
        let rows = tk::random_matrix(&mut rng, n, d);
        let model = PcaModel64::fit(&to_matrix(&rows), Retention::Components(full_rank(n, d))).unwrap();
        let sum: f64 = model.explained_ratio().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(model.explained_variance().windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn spectrum_is_translation_invariant(seed in any::<u64>(), shift in -100.0f64..100.0) {
        let mut rng = tk::rng(seed);
        let rows = tk::random_matrix(&mut rng, 8, 5);
        let shifted: tk::Rows = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let a = PcaModel64::fit(&to_matrix(&rows), Retention::Components(5)).unwrap();
        let b = PcaModel64::fit(&to_matrix(&shifted), Retention::Components(5)).unwrap();
        for (x, y) in a.explained_variance().iter().zip(b.explained_variance()) {
            prop_assert!((x - y).abs() < 1e-8 * x.max(1.0));
        }
    }
}
