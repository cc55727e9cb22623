//! Raw counter ingestion and the canonical measurement store.
//!
//! A store is keyed by `(suite, workload, machine)`; each run holds one
//! counter per canonical event. Raw `perf stat -x,` style dumps are translated
//! to canonical event names through a per-machine [`CounterMap`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::metrics::Metric;

/// Canonical event vocabulary. Vendor naming lives in [`CounterMap`].
pub const CANONICAL_EVENTS: [&str; 20] = [
    "instructions",
    "cycles",
    "loads",
    "stores",
    "branches",
    "branch_misses",
    "l1i_misses",
    "l1d_misses",
    "l2_misses",
    "l3_misses",
    "l1_itlb_misses",
    "l1_dtlb_misses",
    "l2_tlb_misses",
    "frontend_stall_cycles",
    "backend_stall_cycles",
    "fp_instructions",
    "vector_instructions",
    "kernel_instructions",
    "user_instructions",
    "dram_bytes",
];

pub const STORE_HEADER: [&str; 6] = ["suite", "workload", "machine", "event", "value", "supported"];
pub const SCORES_HEADER: [&str; 5] = ["suite", "workload", "machine", "score", "wallclock_seconds"];

const UNSUPPORTED_TOKENS: [&str; 2] = ["<not supported>", "<not counted>"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate key ({suite}, {workload}, {machine}, {event})")]
    DuplicateKey {
        suite: String,
        workload: String,
        machine: String,
        event: String,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row}: {reason}")]
    InvalidValue { row: usize, reason: String },
    #[error("counter map: {0}")]
    CounterMap(String),
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Per-line problems found while parsing a raw counter dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("line {0}: wrong field count")]
    MalformedLine(usize),
    #[error("line {0}: value is not a non-negative number")]
    NonNumericValue(usize),
    #[error("line {0}: event already reported in this file")]
    DuplicateEvent(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub suite: String,
    pub workload: String,
    pub machine: String,
}

impl RunKey {
    pub fn new(suite: impl Into<String>, workload: impl Into<String>, machine: impl Into<String>) -> Self {
        RunKey {
            suite: suite.into(),
            workload: workload.into(),
            machine: machine.into(),
        }
    }
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.suite, self.workload, self.machine)
    }
}

/// One raw event count.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterSample {
    pub suite: String,
    pub workload: String,
    pub machine: String,
    pub event: String,
    pub value: f64,
    pub supported: bool,
}

impl CounterSample {
    pub fn key(&self) -> RunKey {
        RunKey::new(&self.suite, &self.workload, &self.machine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counter {
    pub value: f64,
    pub supported: bool,
}

/// All counters of one `(suite, workload, machine)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub counters: BTreeMap<String, Counter>,
    pub wallclock_seconds: Option<f64>,
    pub score: Option<f64>,
}

impl RunRecord {
    pub fn new(key: RunKey) -> Self {
        RunRecord {
            key,
            counters: BTreeMap::new(),
            wallclock_seconds: None,
            score: None,
        }
    }

    /// Adds a counter. Panics on a negative or non-finite value; use the
    /// store loaders for untrusted input.
    pub fn with_counter(mut self, event: &str, value: f64) -> Self {
        assert!(value.is_finite() && value >= 0.0, "counter value must be finite and >= 0");
        self.counters.insert(
            event.to_string(),
            Counter {
                value,
                supported: true,
            },
        );
        self
    }

    pub fn with_unsupported(mut self, event: &str) -> Self {
        self.counters.insert(
            event.to_string(),
            Counter {
                value: 0.0,
                supported: false,
            },
        );
        self
    }

    /// Count of a supported event.
    pub fn count(&self, event: &str) -> Option<f64> {
        self.counters
            .get(event)
            .filter(|c| c.supported)
            .map(|c| c.value)
    }

    pub fn samples(&self) -> impl Iterator<Item = CounterSample> + '_ {
        self.counters.iter().map(|(event, c)| CounterSample {
            suite: self.key.suite.clone(),
            workload: self.key.workload.clone(),
            machine: self.key.machine.clone(),
            event: event.clone(),
            value: c.value,
            supported: c.supported,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum RawEventSpec {
    Name(String),
    Detailed {
        event: String,
        #[serde(default)]
        unit: EventUnit,
    },
}

/// Unit the platform reports an event in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventUnit {
    /// Plain count (or bytes for `dram_bytes`).
    #[default]
    Count,
    /// Cache lines; multiplied by `cacheline_bytes` on ingestion.
    Lines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventMapping {
    pub raw: String,
    pub unit: EventUnit,
}

/// Canonical-to-platform event naming for one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterMap {
    pub machine: String,
    pub mapping: BTreeMap<String, EventMapping>,
    pub cacheline_bytes: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMachineMap {
    #[serde(default = "default_cacheline")]
    cacheline_bytes: u32,
    #[serde(default)]
    events: BTreeMap<String, RawEventSpec>,
}

fn default_cacheline() -> u32 {
    64
}

impl CounterMap {
    /// Map that passes canonical names through unchanged.
    pub fn identity(machine: &str) -> Self {
        CounterMap {
            machine: machine.to_string(),
            mapping: BTreeMap::new(),
            cacheline_bytes: 64,
        }
    }

    pub fn new(machine: &str, mapping: BTreeMap<String, EventMapping>, cacheline_bytes: u32) -> Result<Self, DatasetError> {
        if cacheline_bytes == 0 {
            return Err(DatasetError::CounterMap(format!("{machine}: cacheline_bytes must be positive")));
        }
        let mut seen = BTreeSet::new();
        for (canonical, m) in &mapping {
            if !CANONICAL_EVENTS.contains(&canonical.as_str()) {
                return Err(DatasetError::CounterMap(format!(
                    "{machine}: `{canonical}` is not a canonical event"
                )));
            }
            if !seen.insert(m.raw.as_str()) {
                return Err(DatasetError::CounterMap(format!(
                    "{machine}: raw event `{}` mapped twice",
                    m.raw
                )));
            }
        }
        Ok(CounterMap {
            machine: machine.to_string(),
            mapping,
            cacheline_bytes,
        })
    }

    /// Resolves a raw event name to `(canonical name, multiplier)`.
    /// Unmapped names are returned verbatim with multiplier 1.
    pub fn translate<'a>(&'a self, raw: &'a str) -> (&'a str, f64) {
        for (canonical, m) in &self.mapping {
            if m.raw == raw {
                let scale = match m.unit {
                    EventUnit::Count => 1.0,
                    EventUnit::Lines => f64::from(self.cacheline_bytes),
                };
                return (canonical.as_str(), scale);
            }
        }
        (raw, 1.0)
    }
}

/// Parses a counter-map manifest: one TOML table per machine.
///
/// ```toml
/// [CPU-C]
/// cacheline_bytes = 64
/// [CPU-C.events]
/// instructions = "inst_retired.any"
/// dram_bytes = { event = "uncore_imc/cas_count_read/", unit = "lines" }
/// ```
pub fn parse_counter_maps(text: &str) -> Result<BTreeMap<String, CounterMap>, DatasetError> {
    let raw: BTreeMap<String, RawMachineMap> =
        toml::from_str(text).map_err(|e| DatasetError::CounterMap(e.to_string()))?;
    raw.into_iter()
        .map(|(machine, m)| {
            let mapping = m
                .events
                .into_iter()
                .map(|(canonical, spec)| {
                    let mapping = match spec {
                        RawEventSpec::Name(raw) => EventMapping {
                            raw,
                            unit: EventUnit::Count,
                        },
                        RawEventSpec::Detailed { event, unit } => EventMapping { raw: event, unit },
                    };
                    (canonical, mapping)
                })
                .collect();
            let map = CounterMap::new(&machine, mapping, m.cacheline_bytes)?;
            Ok((machine, map))
        })
        .collect()
}

pub fn load_counter_maps(path: &Path) -> Result<BTreeMap<String, CounterMap>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_counter_maps(&text)
}

/// Samples recovered from a raw dump plus every line that was rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub samples: Vec<CounterSample>,
    pub errors: Vec<LineError>,
}

/// Parses a comma-separated counter dump (`value,unit,event[,runtime,pct,...]`).
pub fn parse_counter_text(text: &str, key: &RunKey, map: &CounterMap) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() < 3 || fields[2].trim().is_empty() {
            out.errors.push(LineError::MalformedLine(line_no));
            continue;
        }
        let raw_value = fields[0].trim();
        let (canonical, scale) = map.translate(fields[2].trim());
        let (value, supported) = if UNSUPPORTED_TOKENS.contains(&raw_value) {
            (0.0, false)
        } else {
            match raw_value.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => (v * scale, true),
                _ => {
                    out.errors.push(LineError::NonNumericValue(line_no));
                    continue;
                }
            }
        };
        if !seen.insert(canonical.to_string()) {
            out.errors.push(LineError::DuplicateEvent(line_no));
            continue;
        }
        out.samples.push(CounterSample {
            suite: key.suite.clone(),
            workload: key.workload.clone(),
            machine: key.machine.clone(),
            event: canonical.to_string(),
            value,
            supported,
        });
    }
    out
}

pub fn parse_counter_file(path: &Path, key: &RunKey, map: &CounterMap) -> Result<ParseOutcome, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(parse_counter_text(&text, key, map))
}

/// Scores CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub key: RunKey,
    pub score: Option<f64>,
    pub wallclock_seconds: Option<f64>,
}

/// Immutable collection of runs keyed by `(suite, workload, machine)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementStore {
    records: BTreeMap<RunKey, RunRecord>,
}

impl MeasurementStore {
    /// Groups samples into runs, rejecting repeated `(suite, workload, machine, event)`.
    pub fn from_samples(samples: impl IntoIterator<Item = CounterSample>) -> Result<Self, DatasetError> {
        let mut records: BTreeMap<RunKey, RunRecord> = BTreeMap::new();
        for s in samples {
            if !s.value.is_finite() || s.value < 0.0 {
                return Err(DatasetError::InvalidValue {
                    row: 0,
                    reason: format!("{}: {} = {}", s.key(), s.event, s.value),
                });
            }
            let key = s.key();
            let rec = records.entry(key.clone()).or_insert_with(|| RunRecord::new(key));
            if rec.counters.contains_key(&s.event) {
                return Err(DatasetError::DuplicateKey {
                    suite: s.suite,
                    workload: s.workload,
                    machine: s.machine,
                    event: s.event,
                });
            }
            rec.counters.insert(
                s.event,
                Counter {
                    value: s.value,
                    supported: s.supported,
                },
            );
        }
        Ok(MeasurementStore { records })
    }

    pub fn from_records(records: impl IntoIterator<Item = RunRecord>) -> Result<Self, DatasetError> {
        let mut map = BTreeMap::new();
        for r in records {
            if let Some(prev) = map.insert(r.key.clone(), r) {
                let event = prev.counters.keys().next().cloned().unwrap_or_default();
                return Err(DatasetError::DuplicateKey {
                    suite: prev.key.suite,
                    workload: prev.key.workload,
                    machine: prev.key.machine,
                    event,
                });
            }
        }
        Ok(MeasurementStore { records: map })
    }

    /// Attaches scores and wallclock times to existing runs.
    pub fn with_scores(mut self, rows: impl IntoIterator<Item = ScoreRow>) -> Result<Self, DatasetError> {
        for (i, row) in rows.into_iter().enumerate() {
            let rec = self.records.get_mut(&row.key).ok_or_else(|| DatasetError::InvalidValue {
                row: i + 2,
                reason: format!("scores given for unknown run {}", row.key),
            })?;
            rec.score = row.score;
            rec.wallclock_seconds = row.wallclock_seconds;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &RunKey) -> Option<&RunRecord> {
        self.records.get(key)
    }

    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.values()
    }

    pub fn suites(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.records.keys().map(|k| &k.suite).collect();
        set.into_iter().cloned().collect()
    }

    pub fn machines(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.records.keys().map(|k| &k.machine).collect();
        set.into_iter().cloned().collect()
    }

    pub fn workloads(&self, suite: &str) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .records
            .keys()
            .filter(|k| k.suite == suite)
            .map(|k| &k.workload)
            .collect();
        set.into_iter().cloned().collect()
    }

    pub fn suite_records<'a>(&'a self, suite: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records.values().filter(move |r| r.key.suite == suite)
    }

    pub fn has_scores(&self) -> bool {
        self.records
            .values()
            .any(|r| r.score.is_some() || r.wallclock_seconds.is_some())
    }

    pub fn write_canonical<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(STORE_HEADER)?;
        for rec in self.records.values() {
            for s in rec.samples() {
                out.write_record([
                    s.suite.as_str(),
                    s.workload.as_str(),
                    s.machine.as_str(),
                    s.event.as_str(),
                    &format_real(s.value),
                    if s.supported { "true" } else { "false" },
                ])?;
            }
        }
        out.flush().map_err(|e| DatasetError::io(Path::new("<writer>"), e))?;
        Ok(())
    }

    pub fn write_scores<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SCORES_HEADER)?;
        for rec in self.records.values() {
            if rec.score.is_none() && rec.wallclock_seconds.is_none() {
                continue;
            }
            let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
            out.write_record([
                rec.key.suite.as_str(),
                rec.key.workload.as_str(),
                rec.key.machine.as_str(),
                &opt(rec.score),
                &opt(rec.wallclock_seconds),
            ])?;
        }
        out.flush().map_err(|e| DatasetError::io(Path::new("<writer>"), e))?;
        Ok(())
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v}")
}

fn header_index(headers: &csv::StringRecord, expected: &[&str]) -> Result<Vec<usize>, DatasetError> {
    expected
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| DatasetError::SchemaMismatch(format!("missing column `{name}`")))
        })
        .collect()
}

fn parse_cell<T: std::str::FromStr>(cell: &str, row: usize, column: &str) -> Result<T, DatasetError> {
    cell.trim().parse().map_err(|_| DatasetError::InvalidValue {
        row,
        reason: format!("bad {column} `{cell}`"),
    })
}

/// Reads the canonical store CSV.
pub fn read_canonical<R: Read>(r: R) -> Result<MeasurementStore, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let idx = header_index(rdr.headers()?, &STORE_HEADER)?;
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let cell = |c: usize| rec.get(idx[c]).unwrap_or("");
        let value: f64 = parse_cell(cell(4), row, "value")?;
        if !value.is_finite() || value < 0.0 {
            return Err(DatasetError::InvalidValue {
                row,
                reason: format!("value {value} must be finite and >= 0"),
            });
        }
        let supported: bool = parse_cell(cell(5), row, "supported")?;
        samples.push(CounterSample {
            suite: cell(0).to_string(),
            workload: cell(1).to_string(),
            machine: cell(2).to_string(),
            event: cell(3).to_string(),
            value,
            supported,
        });
    }
    MeasurementStore::from_samples(samples)
}

pub fn read_scores<R: Read>(r: R) -> Result<Vec<ScoreRow>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let idx = header_index(rdr.headers()?, &SCORES_HEADER)?;
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let cell = |c: usize| rec.get(idx[c]).unwrap_or("");
        let positive = |c: usize, name: &str| -> Result<Option<f64>, DatasetError> {
            if cell(c).is_empty() {
                return Ok(None);
            }
            let v: f64 = parse_cell(cell(c), row, name)?;
            if !(v.is_finite() && v > 0.0) {
                return Err(DatasetError::InvalidValue {
                    row,
                    reason: format!("{name} must be positive, got {v}"),
                });
            }
            Ok(Some(v))
        };
        let key = RunKey::new(cell(0), cell(1), cell(2));
        if !seen.insert(key.clone()) {
            return Err(DatasetError::DuplicateKey {
                suite: key.suite,
                workload: key.workload,
                machine: key.machine,
                event: "score".into(),
            });
        }
        rows.push(ScoreRow {
            score: positive(3, "score")?,
            wallclock_seconds: positive(4, "wallclock_seconds")?,
            key,
        });
    }
    Ok(rows)
}

pub fn load_canonical(path: &Path) -> Result<MeasurementStore, DatasetError> {
    let f = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_canonical(f)
}

/// Loads a store and, when given, its scores CSV.
pub fn load_store(path: &Path, scores: Option<&Path>) -> Result<MeasurementStore, DatasetError> {
    let store = load_canonical(path)?;
    match scores {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| DatasetError::io(p, e))?;
            store.with_scores(read_scores(f)?)
        }
        None => Ok(store),
    }
}

/// Metrics a machine can and cannot compute from the events it reported.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineAvailability {
    pub machine: String,
    pub computable: Vec<Metric>,
    /// Blocked metric with the events that were missing or unsupported.
    pub blocked: Vec<(Metric, Vec<&'static str>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub machines: Vec<MachineAvailability>,
}

impl ValidationReport {
    pub fn machine(&self, name: &str) -> Option<&MachineAvailability> {
        self.machines.iter().find(|m| m.machine == name)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Machine | Computable | Blocked (missing events) |\n|---|---|---|\n");
        for m in &self.machines {
            let ok: Vec<&str> = m.computable.iter().map(|x| x.label()).collect();
            let blocked: Vec<String> = m
                .blocked
                .iter()
                .map(|(x, ev)| format!("{} ({})", x.label(), ev.join(", ")))
                .collect();
            s.push_str(&format!("| {} | {} | {} |\n", m.machine, ok.join(", "), blocked.join("; ")));
        }
        s
    }
}

/// Reports, per machine, which metrics every run on it can support.
pub fn validate_store(store: &MeasurementStore) -> ValidationReport {
    let machines = store
        .machines()
        .into_iter()
        .map(|machine| {
            let runs: Vec<&RunRecord> = store.records().filter(|r| r.key.machine == machine).collect();
            let mut computable = Vec::new();
            let mut blocked = Vec::new();
            for metric in Metric::ALL {
                let missing: Vec<&'static str> = metric
                    .inputs()
                    .iter()
                    .copied()
                    .filter(|ev| runs.iter().any(|r| r.count(ev).is_none()))
                    .collect();
                if missing.is_empty() {
                    computable.push(metric);
                } else {
                    blocked.push((metric, missing));
                }
            }
            MachineAvailability {
                machine,
                computable,
                blocked,
            }
        })
        .collect();
    ValidationReport { machines }
}
