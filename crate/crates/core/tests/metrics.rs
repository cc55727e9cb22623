use std::collections::BTreeMap;

use benchlens::dataset::{load_canonical, RunKey, RunRecord};
use benchlens::metrics::{
    derive_metrics, read_metric_table, summarize_metric, write_metric_table, Metric, MetricTable, MetricVector,
    MetricsError,
};
use benchlens_testkit as tk;
use proptest::prelude::*;

fn table1() -> MetricTable {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/table1/store.csv");
    let store = load_canonical(std::path::Path::new(path)).unwrap();
    store
        .records()
        .map(|r| (r.key.clone(), derive_metrics(r).unwrap()))
        .collect()
}

#[test]
fn table_fixture_reproduces_published_cells() {
    let t = table1();
    assert_eq!(t.len(), tk::TABLE1.len());
    for &(suite, w, _, loads, stores, branches, ipc) in tk::TABLE1 {
        let mv = t[&RunKey::new(suite, w, "CPU-C")];
        assert_eq!(format!("{:.1}", mv.get(Metric::LoadPct).unwrap()), format!("{loads:.1}"), "{w}");
        assert_eq!(format!("{:.1}", mv.get(Metric::StorePct).unwrap()), format!("{stores:.1}"), "{w}");
        assert_eq!(format!("{:.1}", mv.get(Metric::BranchPct).unwrap()), format!("{branches:.1}"), "{w}");
        assert_eq!(format!("{:.3}", mv.get(Metric::Ipc).unwrap()), format!("{ipc:.3}"), "{w}");
    }
}

#[test]
fn stockfish_ipc() {
    let mv = table1()[&RunKey::new("int_rate", "706.stockfish_r", "CPU-C")];
    assert!((mv.get(Metric::Ipc).unwrap() - 3.625).abs() < 5e-4);
}

#[test]
fn int_rate_ipc_geomean() {
    let t = table1();
    let vs: Vec<MetricVector> = t.iter().filter(|(k, _)| k.suite == "int_rate").map(|(_, v)| *v).collect();
    let s = summarize_metric(Metric::Ipc, &vs);
    let published: Vec<f64> = tk::TABLE1.iter().filter(|r| r.0 == "int_rate").map(|r| r.6).collect();
    let oracle = tk::gm(&published);
    assert!((oracle - 2.18803).abs() < 1e-5);
    assert!((s.geomean.unwrap() - oracle).abs() < 1e-5);
    assert_eq!(s.available, 14);
}

#[test]
fn missing_inputs_leave_metrics_unavailable() {
    let r = RunRecord::new(RunKey::new("s", "w", "m"))
        .with_counter("instructions", 2e9)
        .with_counter("cycles", 1e9)
        .with_unsupported("l1i_misses");
    let mv = derive_metrics(&r).unwrap();
    assert_eq!(mv.get(Metric::Ipc), Some(2.0));
    assert_eq!(mv.get(Metric::L1iMpki), None);
    assert_eq!(mv.available().count(), 1);
}

#[test]
fn zero_instructions_is_an_error() {
    let r = RunRecord::new(RunKey::new("s", "w", "m"))
        .with_counter("instructions", 0.0)
        .with_counter("cycles", 1e9);
    assert!(matches!(derive_metrics(&r), Err(MetricsError::MissingDenominator { event: "instructions", .. })));
}

#[test]
fn percentages_above_hundred_are_rejected() {
    let r = RunRecord::new(RunKey::new("s", "w", "m"))
        .with_counter("instructions", 100.0)
        .with_counter("cycles", 100.0)
        .with_counter("loads", 150.0);
    assert!(matches!(derive_metrics(&r), Err(MetricsError::InconsistentCounts { .. })));
}

#[test]
fn kernel_and_user_shares_sum_to_hundred() {
    let r = RunRecord::new(RunKey::new("s", "w", "m"))
        .with_counter("instructions", 1000.0)
        .with_counter("cycles", 500.0)
        .with_counter("kernel_instructions", 30.0)
        .with_counter("user_instructions", 960.0);
    let mv = derive_metrics(&r).unwrap();
    let sum = mv.get(Metric::KernelPct).unwrap() + mv.get(Metric::UserPct).unwrap();
    assert!((sum - 100.0).abs() < 1e-12);
}

#[test]
fn metric_table_round_trip() {
    let t = table1();
    let mut buf = Vec::new();
    write_metric_table(&t, &mut buf).unwrap();
    assert_eq!(read_metric_table(buf.as_slice()).unwrap(), t);
}

#[test]
fn every_metric_key_and_label_resolves() {
    for m in Metric::ALL {
        assert_eq!(Metric::from_key(m.key()), Some(m));
        assert_eq!(Metric::from_key(m.label()), Some(m));
    }
    let keys: BTreeMap<&str, Metric> = Metric::ALL.iter().map(|m| (m.key(), *m)).collect();
    assert_eq!(keys.len(), 19);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// The same miss count is 1000x larger per million than per thousand instructions.
    #[test]
    fn mpmi_is_thousand_times_mpki(misses in 0.0f64..1e12, instr in 1.0f64..1e14, cycles in 1.0f64..1e14) {
        let r = RunRecord::new(RunKey::new("s", "w", "m"))
            .with_counter("instructions", instr)
            .with_counter("cycles", cycles)
            .with_counter("l1i_misses", misses)
            .with_counter("l1_itlb_misses", misses)
            .with_counter("branch_misses", misses)
            .with_counter("l2_tlb_misses", misses);
        let mv = derive_metrics(&r).unwrap();
        let mpki = mv.get(Metric::L1iMpki).unwrap();
        let mpmi = mv.get(Metric::L1ItlbMpmi).unwrap();
        prop_assert!((mpmi - 1000.0 * mpki).abs() <= 1e-12 * mpmi.abs().max(1.0));
        prop_assert!((mv.get(Metric::L2TlbMpmi).unwrap() - 1000.0 * mv.get(Metric::BranchMpki).unwrap()).abs()
            <= 1e-12 * mpmi.abs().max(1.0));
        prop_assert!((mpki - misses / instr * 1e3).abs() <= 1e-12 * mpki.max(1.0));
    }

    #[test]
    fn metrics_are_scale_free(scale in 1e-3f64..1e3, instr in 1e6f64..1e12, loads in 0.0f64..1.0, ipc in 0.1f64..5.0) {
        let mk = |s: f64| RunRecord::new(RunKey::new("s", "w", "m"))
            .with_counter("instructions", instr * s)
            .with_counter("cycles", instr / ipc * s)
            .with_counter("loads", instr * loads * s);
        let a = derive_metrics(&mk(1.0)).unwrap();
        let b = derive_metrics(&mk(scale)).unwrap();
        for (m, v) in a.available() {
            prop_assert!((v - b.get(m).unwrap()).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
