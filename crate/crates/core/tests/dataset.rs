use benchlens::dataset::{
    parse_counter_maps, parse_counter_text, read_canonical, read_scores, validate_store, CounterMap, CounterSample,
    DatasetError, LineError, MeasurementStore, RunKey, CANONICAL_EVENTS,
};
use benchlens::metrics::Metric;
use proptest::prelude::*;

fn sample(w: &str, m: &str, event: &str, value: f64) -> CounterSample {
    CounterSample {
        suite: "s".into(),
        workload: w.into(),
        machine: m.into(),
        event: event.into(),
        value,
        supported: true,
    }
}

#[test]
fn duplicate_samples_are_rejected() {
    let err = MeasurementStore::from_samples([sample("a", "m", "cycles", 1.0), sample("a", "m", "cycles", 2.0)]);
    assert!(matches!(err, Err(DatasetError::DuplicateKey { .. })));
}

#[test]
fn counter_map_translates_and_scales_lines() {
    let maps = parse_counter_maps(
        r#"
[CPU-A]
cacheline_bytes = 128
[CPU-A.events]
instructions = "inst_retired.any"
dram_bytes = { event = "imc/cas/", unit = "lines" }
"#,
    )
    .unwrap();
    let key = RunKey::new("s", "w", "CPU-A");
    let out = parse_counter_text("100,,inst_retired.any\n3,,imc/cas/\n", &key, &maps["CPU-A"]);
    assert!(out.errors.is_empty());
    let by: Vec<(&str, f64)> = out.samples.iter().map(|s| (s.event.as_str(), s.value)).collect();
    assert_eq!(by, vec![("instructions", 100.0), ("dram_bytes", 384.0)]);
}

#[test]
fn counter_map_rejects_bad_manifests() {
    assert!(parse_counter_maps("[X.events]\nnot_an_event = \"a\"").is_err());
    assert!(parse_counter_maps("[X.events]\ncycles = \"a\"\ninstructions = \"a\"").is_err());
    assert!(parse_counter_maps("[X]\nbogus = 1").is_err());
}

#[test]
fn line_errors_are_collected_not_fatal() {
    let key = RunKey::new("s", "w", "m");
    let text = "# header\n\n1,,cycles\nabc,,instructions\nonly,two\n5,,cycles\n";
    let out = parse_counter_text(text, &key, &CounterMap::identity("m"));
    assert_eq!(out.samples.len(), 1);
    assert_eq!(
        out.errors,
        vec![LineError::NonNumericValue(4), LineError::MalformedLine(5), LineError::DuplicateEvent(6)]
    );
}

#[test]
fn bundled_table_fixture_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/table1/store.csv");
    let store = read_canonical(std::fs::File::open(path).unwrap()).unwrap();
    assert_eq!(store.len(), 52);
    assert_eq!(store.workloads("int_rate").len(), 14);
    assert_eq!(store.workloads("int_speed").len(), 13);
    assert_eq!(store.workloads("fp_rate").len(), 12);
    assert_eq!(store.workloads("fp_speed").len(), 13);
    let report = validate_store(&store);
    let c = report.machine("CPU-C").unwrap();
    assert!(c.computable.contains(&Metric::Ipc));
    assert!(c.computable.contains(&Metric::LoadPct));
    assert!(c.blocked.iter().any(|(m, ev)| *m == Metric::L1iMpki && ev == &["l1i_misses"]));
}

#[test]
fn scores_must_be_positive() {
    let csv = "suite,workload,machine,score,wallclock_seconds\ns,w,m,0,1\n";
    assert!(matches!(read_scores(csv.as_bytes()), Err(DatasetError::InvalidValue { .. })));
    let csv = "suite,workload,machine,score,wallclock_seconds\ns,w,m,,1\n";
    assert_eq!(read_scores(csv.as_bytes()).unwrap()[0].score, None);
}

fn arb_value() -> impl Strategy<Value = f64> {
    prop_oneof![(0u64..1_000_000_000_000u64).prop_map(|v| v as f64), 0.0f64..1e15, Just(0.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_round_trip_is_lossless(
        cells in prop::collection::btree_map(
            (0usize..4, 0usize..3, 0usize..CANONICAL_EVENTS.len()),
            (arb_value(), any::<bool>()),
            1..60,
        )
    ) {
        let samples: Vec<CounterSample> = cells
            .iter()
            .map(|(&(w, m, e), &(v, supported))| CounterSample {
                suite: "suite".into(),
                workload: format!("w{w}"),
                machine: format!("CPU-{m}"),
                event: CANONICAL_EVENTS[e].into(),
                value: if supported { v } else { 0.0 },
                supported,
            })
            .collect();
        let store = MeasurementStore::from_samples(samples).unwrap();
        let mut buf = Vec::new();
        store.write_canonical(&mut buf).unwrap();
        let back = read_canonical(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &store);
        let mut again = Vec::new();
        back.write_canonical(&mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn parser_accounts_for_every_content_line(lines in prop::collection::vec("[ -~]{0,40}", 0..30)) {
        let text = lines.join("\n");
        let out = parse_counter_text(&text, &RunKey::new("s", "w", "m"), &CounterMap::identity("m"));
        let content = lines.iter().filter(|l| !l.trim().is_empty() && !l.trim().starts_with('#')).count();
        prop_assert_eq!(out.samples.len() + out.errors.len(), content);
    }
}
