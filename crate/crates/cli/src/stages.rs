//! Pipeline stages. Each stage recomputes what it needs from the store and
//! writes only its own artifacts, so `report` is a plain composition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use benchlens::cluster::{build_dendrogram, ClusterCut, ClusterError};
use benchlens::compare::{compare_suites, instruction_counts, instruction_volume_ratio};
use benchlens::dataset::{
    load_counter_maps, load_store, parse_counter_file, validate_store, CounterMap, EventUnit, MeasurementStore, RunKey,
};
use benchlens::features::{build_matrix, metric_scales, suite_cells};
use benchlens::metrics::{derive_metrics, summarize_metric, Metric, MetricTable, MetricVector};
use benchlens::proxy::{parse_mix, search_mix, simulate_rrr, ProxyError, RrrSchedule, WorkloadProfile};
use benchlens::reduce::{fit_pca, loading_table, project, write_scores_csv, Retention};
use benchlens::subset::{evaluate_subset, oracle_best_subset, reports_to_markdown, write_reports_csv, ScoreTable, SubsetError};
use benchlens::{Dendrogram64, FeatureMatrix64, Matrix64, PcaModel64};

use crate::config::{Cut, Format, PipelineConfig};
use crate::CliError;

/// Suites with fewer workloads are skipped when suites are picked automatically.
pub const MIN_SUITE_WORKLOADS: usize = 3;

fn data<E: std::fmt::Debug + std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::data(stage, &e)
}

fn subset_err(stage: &'static str) -> impl Fn(SubsetError) -> CliError {
    move |e| match e {
        SubsetError::BudgetExceeded { .. } => CliError::Budget {
            stage,
            message: e.to_string(),
        },
        e => CliError::data(stage, &e),
    }
}

fn proxy_err(stage: &'static str) -> impl Fn(ProxyError) -> CliError {
    move |e| match e {
        ProxyError::BudgetExceeded { .. } => CliError::Budget {
            stage,
            message: e.to_string(),
        },
        e => CliError::data(stage, &e),
    }
}

/// Output sink that honours the selected formats and records what it wrote.
pub struct Output<'a> {
    cfg: &'a PipelineConfig,
    pub written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Output { cfg, written: Vec::new() }
    }

    fn format_of(rel: &str) -> Option<Format> {
        match Path::new(rel).extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "md" => Some(Format::Md),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }

    pub fn emit(&mut self, stage: &'static str, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        if Self::format_of(rel).is_some_and(|f| !self.cfg.wants(f)) {
            return Ok(());
        }
        let path = self.cfg.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(stage, dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(stage, &path, e))?;
        self.written.push(PathBuf::from(rel));
        Ok(())
    }
}

fn to_vec<E>(f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<Vec<u8>, E> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn open_store(cfg: &PipelineConfig, stage: &'static str) -> Result<MeasurementStore, CliError> {
    let path = cfg
        .store
        .as_deref()
        .ok_or_else(|| CliError::Config("no store given (use --store or `store` in the config)".into()))?;
    load_store(path, cfg.scores.as_deref()).map_err(data(stage))
}

pub fn metric_table(store: &MeasurementStore, stage: &'static str) -> Result<MetricTable, CliError> {
    store
        .records()
        .map(|r| Ok((r.key.clone(), derive_metrics(r).map_err(data(stage))?)))
        .collect()
}

/// Suites to analyse and whether the user named them.
fn selected_suites(cfg: &PipelineConfig, store: &MeasurementStore) -> Result<(Vec<String>, bool), CliError> {
    if cfg.suites.is_empty() {
        return Ok((store.suites(), false));
    }
    let known = store.suites();
    for s in &cfg.suites {
        if !known.contains(s) {
            return Err(CliError::Data {
                stage: "config",
                kind: "UnknownSuite".into(),
                message: format!("suite `{s}` is not in the store"),
            });
        }
    }
    Ok((cfg.suites.clone(), true))
}

pub fn ingest(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    const STAGE: &str = "ingest";
    let raw = cfg
        .raw
        .as_deref()
        .ok_or_else(|| CliError::Config("ingest needs --raw DIR (MACHINE/SUITE/WORKLOAD.csv)".into()))?;
    let maps: BTreeMap<String, CounterMap> = match &cfg.counter_maps {
        Some(p) => load_counter_maps(p).map_err(data(STAGE))?,
        None => BTreeMap::new(),
    };
    let mut files = Vec::new();
    for machine in sorted_dirs(raw, STAGE)? {
        for suite in sorted_dirs(&raw.join(&machine), STAGE)? {
            let dir = raw.join(&machine).join(&suite);
            let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| CliError::io(STAGE, &dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for path in entries {
                let workload = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                files.push((RunKey::new(&suite, workload, &machine), path));
            }
        }
    }
    let mut samples = Vec::new();
    let mut log = String::from("| Run | Events | Rejected lines |\n|---|---|---|\n");
    let mut rejected = 0;
    for (key, path) in &files {
        let map = maps.get(&key.machine).cloned().unwrap_or_else(|| CounterMap::identity(&key.machine));
        let outcome = parse_counter_file(path, key, &map).map_err(data(STAGE))?;
        rejected += outcome.errors.len();
        let errs: Vec<String> = outcome.errors.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(log, "| {key} | {} | {} |", outcome.samples.len(), errs.join("; "));
        samples.extend(outcome.samples);
    }
    let store = MeasurementStore::from_samples(samples).map_err(data(STAGE))?;
    let csv = to_vec(|b| store.write_canonical(b)).map_err(data(STAGE))?;
    out.emit(STAGE, "store.csv", csv)?;
    let mut md = String::from("# Ingest\n\n");
    md.push_str(&log);
    md.push_str("\n## Counter mappings\n\n");
    if maps.is_empty() {
        md.push_str("None; event names are read as canonical names.\n");
    } else {
        md.push_str("| Machine | Canonical event | Platform event | Unit |\n|---|---|---|---|\n");
        for (machine, map) in &maps {
            for (event, m) in &map.mapping {
                let unit = match m.unit {
                    EventUnit::Count => "count".to_string(),
                    EventUnit::Lines => format!("lines x {} B", map.cacheline_bytes),
                };
                let _ = writeln!(md, "| {machine} | {event} | {} | {unit} |", m.raw);
            }
        }
    }
    md.push_str("\n## Metric availability\n\n");
    md.push_str(&validate_store(&store).to_markdown());
    out.emit(STAGE, "ingest.md", md)?;
    Ok(format!("ingest: {} runs from {} files, {rejected} rejected lines", store.len(), files.len()))
}

fn sorted_dirs(dir: &Path, stage: &'static str) -> Result<Vec<String>, CliError> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map_err(|e| CliError::io(stage, dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    v.sort();
    Ok(v)
}

pub fn derive(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    const STAGE: &str = "derive";
    let store = open_store(cfg, STAGE)?;
    let table = metric_table(&store, STAGE)?;
    let csv = to_vec(|b| benchlens::metrics::write_metric_table(&table, b)).map_err(data(STAGE))?;
    out.emit(STAGE, "metrics.csv", csv)?;
    out.emit(STAGE, "validation.md", validate_store(&store).to_markdown())?;

    let mut md = String::from("# Suite summary\n\nGeometric mean over workloads (zeros excluded).\n");
    for suite in store.suites() {
        for machine in store.machines() {
            let vs: Vec<MetricVector> = table
                .iter()
                .filter(|(k, _)| k.suite == suite && k.machine == machine)
                .map(|(_, v)| *v)
                .collect();
            if vs.is_empty() {
                continue;
            }
            let _ = write!(md, "\n## {suite} on {machine} ({} workloads)\n\n", vs.len());
            md.push_str("| Metric | Available | Geomean | Min | Median | Max |\n|---|---|---|---|---|---|\n");
            for m in Metric::ALL {
                let s = summarize_metric(m, &vs);
                let (Some(g), Some(b)) = (s.geomean, s.spread) else { continue };
                let _ = writeln!(
                    md,
                    "| {} | {} | {g:.4} | {:.4} | {:.4} | {:.4} |",
                    m.label(),
                    s.available,
                    b.min,
                    b.median,
                    b.max
                );
            }
        }
    }
    out.emit(STAGE, "summary.md", md)?;
    Ok(format!("derive: {} runs, {} suites", table.len(), store.suites().len()))
}

struct SuiteFeatures {
    raw: FeatureMatrix64,
    normalized: FeatureMatrix64,
}

fn featurize_suite(table: &MetricTable, store: &MeasurementStore, suite: &str) -> Result<SuiteFeatures, CliError> {
    const STAGE: &str = "featurize";
    let cells = suite_cells(table, suite);
    let workloads = store.workloads(suite);
    let machines: Vec<String> = cells.keys().map(|(_, m)| m.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let raw: FeatureMatrix64 = build_matrix(&cells, &workloads, &machines).map_err(data(STAGE))?;
    let normalized = raw.normalize().map_err(data(STAGE))?;
    Ok(SuiteFeatures { raw, normalized })
}

struct SuitePca {
    model: PcaModel64,
    scores: Matrix64,
    note: Option<String>,
}

fn pca_suite(cfg: &PipelineConfig, f: &SuiteFeatures) -> Result<SuitePca, CliError> {
    const STAGE: &str = "pca";
    let n = f.normalized.rows().len();
    let d = f.normalized.values().cols();
    let usable = n.saturating_sub(1).min(d).max(1);
    let (retention, note) = match cfg.retention {
        Retention::Components(k) if k > usable => (
            Retention::Components(usable),
            Some(format!("requested {k} components; {usable} available, kept {usable}")),
        ),
        r => (r, None),
    };
    let model = fit_pca(&f.normalized, retention).map_err(data(STAGE))?;
    let scores = project(&model, &f.normalized).map_err(data(STAGE))?;
    Ok(SuitePca { model, scores, note })
}

fn cluster_suite(cfg: &PipelineConfig, f: &SuiteFeatures, p: &SuitePca) -> Result<Dendrogram64, CliError> {
    build_dendrogram(&p.scores, f.normalized.rows(), cfg.linkage).map_err(data("cluster"))
}

/// Runs `body` per suite; automatically chosen suites that are too small are skipped.
fn for_each_suite(
    cfg: &PipelineConfig,
    store: &MeasurementStore,
    mut body: impl FnMut(&str) -> Result<Option<String>, CliError>,
) -> Result<Vec<String>, CliError> {
    let (suites, explicit) = selected_suites(cfg, store)?;
    let mut lines = Vec::new();
    for suite in suites {
        let n = store.workloads(&suite).len();
        if !explicit && n < MIN_SUITE_WORKLOADS {
            lines.push(format!("{suite}: skipped ({n} workloads)"));
            continue;
        }
        if let Some(line) = body(&suite)? {
            lines.push(line);
        }
    }
    Ok(lines)
}

pub fn featurize(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    const STAGE: &str = "featurize";
    let store = open_store(cfg, STAGE)?;
    let table = metric_table(&store, STAGE)?;
    let lines = for_each_suite(cfg, &store, |suite| {
        let f = featurize_suite(&table, &store, suite)?;
        let csv = to_vec(|b| f.raw.write_csv(b)).map_err(data(STAGE))?;
        out.emit(STAGE, &format!("{suite}/features.csv"), csv)?;
        let cols = f.raw.columns().unwrap_or_default();
        let constant: Vec<String> = cols
            .iter()
            .zip(f.normalized.constant_columns())
            .filter(|(_, c)| **c)
            .map(|(col, _)| col.to_string())
            .collect();
        let dropped: Vec<String> = f.raw.dropped().iter().map(|c| c.to_string()).collect();
        let mut md = format!(
            "# Features: {suite}\n\n- Workloads: {}\n- Dimensions: {}\n",
            f.raw.rows().len(),
            cols.len()
        );
        let _ = writeln!(md, "- Dropped columns ({}): {}", dropped.len(), dropped.join(", "));
        let _ = writeln!(md, "- Constant columns ({}): {}", constant.len(), constant.join(", "));
        out.emit(STAGE, &format!("{suite}/features.md"), md)?;
        Ok(Some(format!("{suite}: {} x {}", f.raw.rows().len(), cols.len())))
    })?;
    Ok(format!("featurize: {}", lines.join("; ")))
}

fn emit_pca(out: &mut Output, cfg: &PipelineConfig, suite: &str, f: &SuiteFeatures, p: &SuitePca) -> Result<String, CliError> {
    const STAGE: &str = "pca";
    let csv = to_vec(|b| p.model.write_variance_csv(b)).map_err(data(STAGE))?;
    out.emit(STAGE, &format!("{suite}/pca_variance.csv"), csv)?;
    let csv = to_vec(|b| write_scores_csv(f.normalized.rows(), &p.scores, b)).map_err(data(STAGE))?;
    out.emit(STAGE, &format!("{suite}/pca_scores.csv"), csv)?;
    let report = loading_table(&p.model, cfg.top).map_err(data(STAGE))?;
    let kept: f64 = p.model.explained_ratio().iter().sum();
    let mut md = format!(
        "# PCA: {suite}\n\n{} components explain {:.2}% of the variance.\n\n",
        p.model.k(),
        kept * 100.0
    );
    if let Some(note) = &p.note {
        let _ = writeln!(md, "Note: {note}.\n");
    }
    md.push_str("| PC | Explained |\n|---|---|\n");
    for (i, r) in p.model.explained_ratio().iter().enumerate() {
        let _ = writeln!(md, "| PC{} | {:.2}% |", i + 1, r * 100.0);
    }
    md.push_str("\n## Loadings\n\n");
    md.push_str(&report.to_markdown());
    out.emit(STAGE, &format!("{suite}/loadings.md"), md)?;
    Ok(format!("{suite}: {} PCs, {:.1}%", p.model.k(), kept * 100.0))
}

pub fn pca(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    let store = open_store(cfg, "pca")?;
    let table = metric_table(&store, "pca")?;
    let lines = for_each_suite(cfg, &store, |suite| {
        let f = featurize_suite(&table, &store, suite)?;
        let p = pca_suite(cfg, &f)?;
        emit_pca(out, cfg, suite, &f, &p).map(Some)
    })?;
    Ok(format!("pca: {}", lines.join("; ")))
}

fn apply_cut(d: &Dendrogram64, cut: &Cut, scores: &Matrix64) -> Result<(ClusterCut<f64>, Option<f64>), ClusterError> {
    let (c, line) = match *cut {
        Cut::Threshold(h) => (d.cut(h), Some(h)),
        Cut::Groups(g) => {
            let c = d.cut_groups(g)?;
            let n = d.leaves().len();
            let h = d.merges();
            let line = (g >= 2 && g < n).then(|| (h[n - g - 1].height + h[n - g].height) / 2.0);
            (c, line)
        }
    };
    Ok((c.with_medoids(d, scores)?, line))
}

fn emit_cluster(out: &mut Output, cfg: &PipelineConfig, suite: &str, d: &Dendrogram64, scores: &Matrix64) -> Result<String, CliError> {
    const STAGE: &str = "cluster";
    let csv = to_vec(|b| d.write_csv(b)).map_err(data(STAGE))?;
    out.emit(STAGE, &format!("{suite}/dendrogram.csv"), csv)?;
    let mut line = format!("{suite}: {} leaves", d.leaves().len());
    let mut cut_height = None;
    if let Some(cut) = &cfg.cut {
        let (c, h) = apply_cut(d, cut, scores).map_err(data(STAGE))?;
        cut_height = h;
        let csv = to_vec(|b| c.write_csv(d.leaves(), b)).map_err(data(STAGE))?;
        out.emit(STAGE, &format!("{suite}/clusters.csv"), csv)?;
        let mut md = format!("# Clusters: {suite} ({} linkage)\n\n| Group | Medoid | Members |\n|---|---|---|\n", d.linkage());
        for (i, (g, m)) in c.group_names(d.leaves()).iter().zip(&c.medoids).enumerate() {
            let _ = writeln!(md, "| {} | {m} | {} |", i + 1, g.join(", "));
        }
        out.emit(STAGE, &format!("{suite}/clusters.md"), md)?;
        let _ = write!(line, ", {} groups", c.groups.len());
    }
    let title = format!("{suite} ({} linkage)", d.linkage());
    out.emit(STAGE, &format!("{suite}/dendrogram.svg"), d.to_svg(&title, cut_height))?;
    Ok(line)
}

pub fn cluster(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    let store = open_store(cfg, "cluster")?;
    let table = metric_table(&store, "cluster")?;
    let lines = for_each_suite(cfg, &store, |suite| {
        let f = featurize_suite(&table, &store, suite)?;
        let p = pca_suite(cfg, &f)?;
        let d = cluster_suite(cfg, &f, &p)?;
        emit_cluster(out, cfg, suite, &d, &p.scores).map(Some)
    })?;
    Ok(format!("cluster: {}", lines.join("; ")))
}

fn suite_has_scores(store: &MeasurementStore, suite: &str) -> bool {
    store.suite_records(suite).all(|r| r.score.is_some())
}

fn wallclock(store: &MeasurementStore, suite: &str) -> Option<BTreeMap<String, f64>> {
    let mut m: BTreeMap<String, f64> = BTreeMap::new();
    for r in store.suite_records(suite) {
        *m.entry(r.key.workload.clone()).or_default() += r.wallclock_seconds?;
    }
    Some(m)
}

fn subset_cut(cfg: &PipelineConfig) -> Option<Cut> {
    cfg.cut.clone().or(cfg.subset_k.map(Cut::Groups))
}

pub fn subset(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    const STAGE: &str = "subset";
    let cut = subset_cut(cfg)
        .ok_or_else(|| CliError::Config("subset needs --groups, --threshold or --subset-k".into()))?;
    let store = open_store(cfg, STAGE)?;
    let table = metric_table(&store, STAGE)?;
    let (_, explicit) = selected_suites(cfg, &store)?;
    let mut reports = Vec::new();
    let mut lines = for_each_suite(cfg, &store, |suite| {
        let n = store.workloads(suite).len();
        if !explicit {
            if !suite_has_scores(&store, suite) {
                return Ok(Some(format!("{suite}: skipped (no scores)")));
            }
            if matches!(cut, Cut::Groups(g) if g > n) {
                return Ok(Some(format!("{suite}: skipped ({n} workloads)")));
            }
        }
        let f = featurize_suite(&table, &store, suite)?;
        let p = pca_suite(cfg, &f)?;
        let d = cluster_suite(cfg, &f, &p)?;
        let (c, _) = apply_cut(&d, &cut, &p.scores).map_err(data(STAGE))?;
        let scores = ScoreTable::from_store(&store, suite).map_err(subset_err(STAGE))?;
        let wall = wallclock(&store, suite);
        let mut report = evaluate_subset(&scores, &c.medoids, wall.as_ref()).map_err(subset_err(STAGE))?;
        let oracle = oracle_best_subset(&scores, c.medoids.len(), cfg.budget).map_err(subset_err(STAGE))?;
        report.oracle_best = Some((oracle.subset.clone(), oracle.aggregate));
        let line = format!(
            "{suite}: {} representatives, accuracy {}",
            report.subset.len(),
            report.aggregate.map_or("n/a".into(), |a| format!("{:.2}%", a * 100.0))
        );
        reports.push(report);
        Ok(Some(line))
    })?;
    if reports.is_empty() {
        lines.push("no suite with scores".into());
    } else {
        let md = format!("# Representative subsets\n\n{}", reports_to_markdown(&reports));
        out.emit(STAGE, "subset.md", md)?;
        let csv = to_vec(|b| write_reports_csv(&reports, b)).map_err(subset_err(STAGE))?;
        out.emit(STAGE, "subset.csv", csv)?;
    }
    Ok(format!("subset: {}", lines.join("; ")))
}

fn require_machine(cfg: &PipelineConfig, what: &str) -> Result<String, CliError> {
    cfg.machine
        .clone()
        .ok_or_else(|| CliError::Config(format!("{what} needs --machine")))
}

pub fn compare(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    const STAGE: &str = "compare";
    let (Some(a), Some(b)) = (&cfg.suite_a, &cfg.suite_b) else {
        return Err(CliError::Config("compare needs --suite-a and --suite-b".into()));
    };
    let machine = require_machine(cfg, "compare")?;
    let store = open_store(cfg, STAGE)?;
    let table = metric_table(&store, STAGE)?;
    let c = compare_suites(&table, a, b, &machine).map_err(data(STAGE))?;
    let stem = format!("compare/{a}_vs_{b}");
    let mut md = format!("# {a} vs {b}\n\n{}", c.to_markdown());
    let ia = instruction_counts(&store, a, &machine);
    let ib = instruction_counts(&store, b, &machine);
    if let Ok(r) = instruction_volume_ratio(&ia, &ib) {
        let _ = write!(md, "\nMean instruction count ratio {a}/{b}: {r:.3}\n");
    }
    let csv = to_vec(|w| c.write_csv(w)).map_err(data(STAGE))?;
    out.emit(STAGE, &format!("{stem}.csv"), csv)?;
    out.emit(STAGE, &format!("{stem}.md"), md)?;
    out.emit(STAGE, &format!("{stem}.svg"), c.to_svg())?;
    Ok(format!("compare: {a} vs {b} on {machine}, {} metrics", c.metrics.len()))
}

struct ProxyInputs {
    pool: Vec<WorkloadProfile>,
    vectors: BTreeMap<String, MetricVector>,
    target: (String, MetricVector),
}

fn proxy_inputs(cfg: &PipelineConfig, store: &MeasurementStore, machine: &str) -> Result<ProxyInputs, CliError> {
    const STAGE: &str = "proxy";
    let (ts, tw) = cfg
        .target
        .clone()
        .ok_or_else(|| CliError::Config("proxy needs --target SUITE/WORKLOAD".into()))?;
    let tkey = RunKey::new(&ts, &tw, machine);
    let trec = store
        .get(&tkey)
        .ok_or_else(|| CliError::data(STAGE, &ProxyError::UnknownWorkload(tkey.to_string())))?;
    let target = derive_metrics(trec).map_err(data(STAGE))?;
    let mut pool = Vec::new();
    let mut vectors = BTreeMap::new();
    for r in store.records() {
        if r.key.machine != machine || r.key == tkey {
            continue;
        }
        if cfg.pool.as_ref().is_some_and(|p| *p != r.key.suite) {
            continue;
        }
        if vectors.contains_key(&r.key.workload) {
            return Err(CliError::Data {
                stage: STAGE,
                kind: "AmbiguousWorkload".into(),
                message: format!("workload `{}` appears in more than one suite; set --pool", r.key.workload),
            });
        }
        pool.push(WorkloadProfile::from_record(r, None).map_err(proxy_err(STAGE))?);
        vectors.insert(r.key.workload.clone(), derive_metrics(r).map_err(data(STAGE))?);
    }
    Ok(ProxyInputs {
        pool,
        vectors,
        target: (tw, target),
    })
}

pub fn proxy(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    const STAGE: &str = "proxy";
    let machine = require_machine(cfg, "proxy")?;
    if cfg.mix.is_none() && cfg.mix_k.is_none() {
        return Err(CliError::Config("proxy needs --mix FILE or --mix-k K".into()));
    }
    let store = open_store(cfg, STAGE)?;
    let inputs = proxy_inputs(cfg, &store, &machine)?;
    let scale_inputs: Vec<MetricVector> = inputs.vectors.values().copied().chain([inputs.target.1]).collect();
    let scales = metric_scales(&scale_inputs);
    let (tname, tvec) = inputs.target.clone();
    let mut lines = Vec::new();

    if let Some(mix_path) = &cfg.mix {
        let text = fs::read_to_string(mix_path).map_err(|e| CliError::io(STAGE, mix_path, e))?;
        let entries = parse_mix(&text).map_err(proxy_err(STAGE))?;
        let mut profiles = Vec::new();
        for e in &entries {
            let p = inputs
                .pool
                .iter()
                .find(|p| p.workload == e.workload)
                .cloned()
                .ok_or_else(|| CliError::data(STAGE, &ProxyError::UnknownWorkload(e.workload.clone())))?;
            profiles.push(match e.duration {
                Some(d) => p.with_duration(d).map_err(proxy_err(STAGE))?,
                None => p,
            });
        }
        let order: Vec<String> = entries.iter().map(|e| e.workload.clone()).collect();
        let copies = cfg.copies.unwrap_or(order.len());
        let schedule = RrrSchedule::staggered(order.clone(), copies, &profiles).map_err(proxy_err(STAGE))?;
        let blend = simulate_rrr(&profiles, &schedule)
            .and_then(|b| b.with_target(tname.clone(), tvec, &cfg.weights, &scales))
            .map_err(proxy_err(STAGE))?;
        let constituents: Vec<(String, MetricVector)> =
            order.iter().map(|w| (w.clone(), inputs.vectors[w])).collect();
        let mut md = format!("# RRR blend on {machine} ({copies} copies)\n\n");
        md.push_str(&blend.to_markdown(&constituents));
        if let (Some(b), Some(t)) = (blend.aggregate.get(Metric::Ipc), tvec.get(Metric::Ipc)) {
            let _ = write!(md, "\nIPC gap to {tname}: {:.2}%\n", (b - t).abs() / t * 100.0);
        }
        out.emit(STAGE, "proxy/blend.md", md)?;
        let csv = to_vec(|w| blend.write_csv(w, &constituents)).map_err(proxy_err(STAGE))?;
        out.emit(STAGE, "proxy/blend.csv", csv)?;
        lines.push(format!(
            "blend of {} workloads, distance {:.4}",
            order.len(),
            blend.distance_to_target.unwrap_or(f64::NAN)
        ));
    }

    if let Some(k) = cfg.mix_k {
        let ranked = search_mix(&inputs.pool, &tvec, k, &cfg.weights, &scales, cfg.budget).map_err(proxy_err(STAGE))?;
        let mut md = format!(
            "# Mix search on {machine}\n\nTarget: {tname}; {} candidate mixes of up to {k} workloads.\n\n| Rank | Mix | Distance | IPC |\n|---|---|---|---|\n",
            ranked.len()
        );
        let mut csv = String::from("rank,mix,distance,ipc\n");
        for (i, r) in ranked.iter().enumerate() {
            let ipc = r.blend.aggregate.get(Metric::Ipc);
            if i < 10 {
                let _ = writeln!(
                    md,
                    "| {} | {} | {:.6} | {} |",
                    i + 1,
                    r.mix.join(" + "),
                    r.distance,
                    ipc.map_or("-".into(), |v| format!("{v:.4}"))
                );
            }
            let _ = writeln!(
                csv,
                "{},{},{:.10},{}",
                i + 1,
                r.mix.join(";"),
                r.distance,
                ipc.map_or(String::new(), |v| format!("{v:.10}"))
            );
        }
        out.emit(STAGE, "proxy/search.md", md)?;
        out.emit(STAGE, "proxy/search.csv", csv)?;
        lines.push(format!("best mix {} at {:.4}", ranked[0].mix.join("+"), ranked[0].distance));
    }
    Ok(format!("proxy: {}", lines.join("; ")))
}

/// Full pipeline: derive, then per-suite features, PCA, clusters and
/// subsets, then the comparison and proxy stages when configured.
pub fn report(cfg: &PipelineConfig, out: &mut Output) -> Result<String, CliError> {
    let mut lines = vec![derive(cfg, out)?, featurize(cfg, out)?, pca(cfg, out)?, cluster(cfg, out)?];
    if subset_cut(cfg).is_some() {
        lines.push(subset(cfg, out)?);
    }
    if cfg.suite_a.is_some() && cfg.suite_b.is_some() && cfg.machine.is_some() {
        lines.push(compare(cfg, out)?);
    }
    if cfg.machine.is_some() && cfg.target.is_some() && (cfg.mix.is_some() || cfg.mix_k.is_some()) {
        lines.push(proxy(cfg, out)?);
    }
    let mut md = String::from("# Report\n\n");
    for l in &lines {
        let _ = writeln!(md, "- {l}");
    }
    md.push_str("\n## Artifacts\n\n");
    let mut files: Vec<String> = out.written.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
    files.sort();
    for f in files {
        let _ = writeln!(md, "- {f}");
    }
    out.emit("report", "report.md", md)?;
    Ok(format!("report: {} stages", lines.len()))
}
