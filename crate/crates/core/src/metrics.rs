//! Derived microarchitectural metrics.
//!
//! Cache and branch misses are normalized per thousand instructions (MPKI),
//! TLB misses per million instructions (MPMI), stalls per cycle, and the
//! instruction-mix shares per retired instruction.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::dataset::{format_real, RunKey, RunRecord};
use crate::stats::{box_stats, geomean_positive, BoxStats};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{key}: `{event}` is missing or zero")]
    MissingDenominator { key: String, event: &'static str },
    #[error("{key}: {metric} = {value} is outside [0, 100]")]
    InconsistentCounts { key: String, metric: &'static str, value: f64 },
    #[error("empty metric group")]
    EmptyGroup,
    #[error("metric table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Ipc,
    L1iMpki,
    L1dMpki,
    L2Mpki,
    L3Mpki,
    L1ItlbMpmi,
    L1DtlbMpmi,
    L2TlbMpmi,
    BranchMpki,
    FrontendStallPct,
    BackendStallPct,
    KernelPct,
    UserPct,
    LoadPct,
    StorePct,
    BranchPct,
    FpPct,
    VectorPct,
    MemBytesPerCycle,
}

pub const METRIC_COUNT: usize = 19;

impl Metric {
    pub const ALL: [Metric; METRIC_COUNT] = [
        Metric::Ipc,
        Metric::L1iMpki,
        Metric::L1dMpki,
        Metric::L2Mpki,
        Metric::L3Mpki,
        Metric::L1ItlbMpmi,
        Metric::L1DtlbMpmi,
        Metric::L2TlbMpmi,
        Metric::BranchMpki,
        Metric::FrontendStallPct,
        Metric::BackendStallPct,
        Metric::KernelPct,
        Metric::UserPct,
        Metric::LoadPct,
        Metric::StorePct,
        Metric::BranchPct,
        Metric::FpPct,
        Metric::VectorPct,
        Metric::MemBytesPerCycle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column key used in CSV exports.
    pub fn key(self) -> &'static str {
        match self {
            Metric::Ipc => "ipc",
            Metric::L1iMpki => "l1i_mpki",
            Metric::L1dMpki => "l1d_mpki",
            Metric::L2Mpki => "l2_mpki",
            Metric::L3Mpki => "l3_mpki",
            Metric::L1ItlbMpmi => "l1_itlb_mpmi",
            Metric::L1DtlbMpmi => "l1_dtlb_mpmi",
            Metric::L2TlbMpmi => "l2_tlb_mpmi",
            Metric::BranchMpki => "branch_mpki",
            Metric::FrontendStallPct => "frontend_stall_pct",
            Metric::BackendStallPct => "backend_stall_pct",
            Metric::KernelPct => "kernel_pct",
            Metric::UserPct => "user_pct",
            Metric::LoadPct => "load_pct",
            Metric::StorePct => "store_pct",
            Metric::BranchPct => "branch_pct",
            Metric::FpPct => "fp_pct",
            Metric::VectorPct => "vector_pct",
            Metric::MemBytesPerCycle => "mem_bytes_per_cycle",
        }
    }

    /// Short human label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Ipc => "ipc",
            Metric::L1iMpki => "L1I$_MPKI",
            Metric::L1dMpki => "L1D$_MPKI",
            Metric::L2Mpki => "L2$_MPKI",
            Metric::L3Mpki => "L3$_MPKI",
            Metric::L1ItlbMpmi => "L1_iTLB_MPMI",
            Metric::L1DtlbMpmi => "L1_dTLB_MPMI",
            Metric::L2TlbMpmi => "L2_TLB_MPMI",
            Metric::BranchMpki => "Branch_MPKI",
            Metric::FrontendStallPct => "Frontend",
            Metric::BackendStallPct => "Backend",
            Metric::KernelPct => "KernelInst",
            Metric::UserPct => "UserInst",
            Metric::LoadPct => "LoadInst",
            Metric::StorePct => "StoreInst",
            Metric::BranchPct => "BranchInst",
            Metric::FpPct => "FLOPs",
            Metric::VectorPct => "VectorInst",
            Metric::MemBytesPerCycle => "Mem_Access",
        }
    }

    pub fn from_key(key: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.key() == key || m.label() == key)
    }

    /// Canonical events the metric is computed from.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Metric::Ipc => &["instructions", "cycles"],
            Metric::L1iMpki => &["l1i_misses", "instructions"],
            Metric::L1dMpki => &["l1d_misses", "instructions"],
            Metric::L2Mpki => &["l2_misses", "instructions"],
            Metric::L3Mpki => &["l3_misses", "instructions"],
            Metric::L1ItlbMpmi => &["l1_itlb_misses", "instructions"],
            Metric::L1DtlbMpmi => &["l1_dtlb_misses", "instructions"],
            Metric::L2TlbMpmi => &["l2_tlb_misses", "instructions"],
            Metric::BranchMpki => &["branch_misses", "instructions"],
            Metric::FrontendStallPct => &["frontend_stall_cycles", "cycles"],
            Metric::BackendStallPct => &["backend_stall_cycles", "cycles"],
            Metric::KernelPct => &["kernel_instructions", "instructions"],
            Metric::UserPct => &["user_instructions", "instructions"],
            Metric::LoadPct => &["loads", "instructions"],
            Metric::StorePct => &["stores", "instructions"],
            Metric::BranchPct => &["branches", "instructions"],
            Metric::FpPct => &["fp_instructions", "instructions"],
            Metric::VectorPct => &["vector_instructions", "instructions"],
            Metric::MemBytesPerCycle => &["dram_bytes", "cycles"],
        }
    }

    /// Event in the numerator.
    pub fn numerator(self) -> &'static str {
        self.inputs()[0]
    }

    /// True for metrics normalized by instruction count.
    pub fn per_instruction(self) -> bool {
        self.inputs()[1] == "instructions"
    }
}

/// The nineteen derived metrics of one run; `None` marks unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricVector {
    values: [Option<f64>; METRIC_COUNT],
}

impl MetricVector {
    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values[m.index()]
    }

    pub fn set(&mut self, m: Metric, v: Option<f64>) {
        self.values[m.index()] = v;
    }

    pub fn with(mut self, m: Metric, v: f64) -> Self {
        self.set(m, Some(v));
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, Option<f64>)> + '_ {
        Metric::ALL.into_iter().map(|m| (m, self.get(m)))
    }

    pub fn available(&self) -> impl Iterator<Item = (Metric, f64)> + '_ {
        self.iter().filter_map(|(m, v)| v.map(|v| (m, v)))
    }
}

/// Computes every metric whose input events are present and supported.
///
/// Kernel and user shares are taken over `kernel + user` instructions when
/// both are counted, so that they add up to 100; otherwise each is a share of
/// all retired instructions.
pub fn derive_metrics(record: &RunRecord) -> Result<MetricVector, MetricsError> {
    let key = record.key.to_string();
    let positive = |event: &'static str| {
        record
            .count(event)
            .filter(|v| *v > 0.0)
            .ok_or(MetricsError::MissingDenominator { key: key.clone(), event })
    };
    let instructions = positive("instructions")?;
    let cycles = positive("cycles")?;

    let mut mv = MetricVector::default();
    for metric in Metric::ALL {
        let Some(num) = record.count(metric.numerator()) else {
            continue;
        };
        let denom = if metric.per_instruction() { instructions } else { cycles };
        let value = match metric {
            Metric::Ipc => instructions / cycles,
            Metric::L1iMpki
            | Metric::L1dMpki
            | Metric::L2Mpki
            | Metric::L3Mpki
            | Metric::BranchMpki => num / (denom / 1e3),
            Metric::L1ItlbMpmi | Metric::L1DtlbMpmi | Metric::L2TlbMpmi => num / (denom / 1e6),
            Metric::MemBytesPerCycle => num / denom,
            Metric::KernelPct | Metric::UserPct => {
                match (record.count("kernel_instructions"), record.count("user_instructions")) {
                    (Some(k), Some(u)) if k + u > 0.0 => num / (k + u) * 100.0,
                    _ => num / denom * 100.0,
                }
            }
            _ => num / denom * 100.0,
        };
        let bounded = matches!(
            metric,
            Metric::LoadPct
                | Metric::StorePct
                | Metric::BranchPct
                | Metric::FrontendStallPct
                | Metric::BackendStallPct
                | Metric::KernelPct
                | Metric::UserPct
        );
        if bounded && value > 100.0 * (1.0 + 1e-12) {
            return Err(MetricsError::InconsistentCounts {
                key: key.clone(),
                metric: metric.label(),
                value,
            });
        }
        mv.set(metric, Some(value));
    }
    Ok(mv)
}

/// Distribution summary of one metric across a group of workloads.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: Metric,
    /// Workloads with the metric available.
    pub available: usize,
    pub geomean: Option<f64>,
    /// Available values left out of the geometric mean because they are zero.
    pub excluded_zeros: usize,
    pub spread: Option<BoxStats<f64>>,
}

pub fn summarize_metric(metric: Metric, vectors: &[MetricVector]) -> MetricSummary {
    let values: Vec<f64> = vectors.iter().filter_map(|v| v.get(metric)).collect();
    let gm = geomean_positive(&values);
    MetricSummary {
        metric,
        available: values.len(),
        geomean: gm.value,
        excluded_zeros: gm.excluded,
        spread: box_stats(&values),
    }
}

/// Per-metric summary of one group.
pub fn summarize_group(vectors: &[MetricVector]) -> Result<Vec<MetricSummary>, MetricsError> {
    if vectors.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    Ok(Metric::ALL.into_iter().map(|m| summarize_metric(m, vectors)).collect())
}

/// Per-suite summary of grouped metric vectors.
pub fn suite_summary(
    groups: &BTreeMap<String, Vec<MetricVector>>,
) -> Result<BTreeMap<String, Vec<MetricSummary>>, MetricsError> {
    groups
        .iter()
        .map(|(suite, vs)| Ok((suite.clone(), summarize_group(vs)?)))
        .collect()
}

/// Derived metrics of every run in a store, keyed like the store.
pub type MetricTable = BTreeMap<RunKey, MetricVector>;

pub fn write_metric_table<W: Write>(table: &MetricTable, w: W) -> Result<(), MetricsError> {
    let err = |e: csv::Error| MetricsError::Table(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["suite", "workload", "machine"];
    header.extend(Metric::ALL.iter().map(|m| m.key()));
    out.write_record(&header).map_err(err)?;
    for (key, mv) in table {
        let mut row = vec![key.suite.clone(), key.workload.clone(), key.machine.clone()];
        row.extend(mv.iter().map(|(_, v)| v.map(format_real).unwrap_or_default()));
        out.write_record(&row).map_err(err)?;
    }
    out.flush().map_err(|e| MetricsError::Table(e.to_string()))
}

pub fn read_metric_table<R: Read>(r: R) -> Result<MetricTable, MetricsError> {
    let err = |e: csv::Error| MetricsError::Table(e.to_string());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(err)?.clone();
    if headers.len() < 3 || &headers[0] != "suite" || &headers[1] != "workload" || &headers[2] != "machine" {
        return Err(MetricsError::Table("header must start with suite,workload,machine".into()));
    }
    let cols: Vec<Metric> = headers
        .iter()
        .skip(3)
        .map(|h| Metric::from_key(h).ok_or_else(|| MetricsError::Table(format!("unknown metric column `{h}`"))))
        .collect::<Result<_, _>>()?;
    let mut table = MetricTable::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let key = RunKey::new(&rec[0], &rec[1], &rec[2]);
        let mut mv = MetricVector::default();
        for (m, cell) in cols.iter().zip(rec.iter().skip(3)) {
            if !cell.is_empty() {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| MetricsError::Table(format!("{key}: bad value `{cell}`")))?;
                mv.set(*m, Some(v));
            }
        }
        if table.insert(key.clone(), mv).is_some() {
            return Err(MetricsError::Table(format!("duplicate row {key}")));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run() -> RunRecord {
        RunRecord::new(RunKey::new("s", "w", "m"))
    }

    #[test]
    fn mpki_and_mpmi_definitions() {
        let rec = run()
            .with_counter("instructions", 2e6)
            .with_counter("cycles", 1e6)
            .with_counter("l1d_misses", 5000.0)
            .with_counter("l1_dtlb_misses", 5000.0)
            .with_counter("branch_misses", 0.0);
        let mv = derive_metrics(&rec).unwrap();
        assert_eq!(mv.get(Metric::Ipc), Some(2.0));
        assert_eq!(mv.get(Metric::L1dMpki), Some(2.5));
        assert_eq!(mv.get(Metric::L1DtlbMpmi), Some(2500.0));
        assert_eq!(mv.get(Metric::BranchMpki), Some(0.0));
        assert_eq!(mv.get(Metric::L3Mpki), None);
    }

    #[test]
    fn missing_denominator() {
        let rec = run().with_counter("instructions", 10.0);
        assert!(matches!(
            derive_metrics(&rec),
            Err(MetricsError::MissingDenominator { event: "cycles", .. })
        ));
        let rec = run().with_counter("instructions", 0.0).with_counter("cycles", 1.0);
        assert!(matches!(
            derive_metrics(&rec),
            Err(MetricsError::MissingDenominator { event: "instructions", .. })
        ));
    }

    #[test]
    fn unsupported_events_stay_unavailable() {
        let rec = run()
            .with_counter("instructions", 100.0)
            .with_counter("cycles", 50.0)
            .with_unsupported("dram_bytes")
            .with_unsupported("l2_misses");
        let mv = derive_metrics(&rec).unwrap();
        assert_eq!(mv.get(Metric::MemBytesPerCycle), None);
        assert_eq!(mv.get(Metric::L2Mpki), None);
    }

    #[test]
    fn kernel_and_user_shares_add_to_100() {
        let rec = run()
            .with_counter("instructions", 1000.0)
            .with_counter("cycles", 500.0)
            .with_counter("kernel_instructions", 37.0)
            .with_counter("user_instructions", 970.0);
        let mv = derive_metrics(&rec).unwrap();
        let total = mv.get(Metric::KernelPct).unwrap() + mv.get(Metric::UserPct).unwrap();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn share_above_100_is_rejected() {
        let rec = run()
            .with_counter("instructions", 100.0)
            .with_counter("cycles", 50.0)
            .with_counter("loads", 150.0);
        assert!(matches!(derive_metrics(&rec), Err(MetricsError::InconsistentCounts { .. })));
    }

    #[test]
    fn single_workload_summary() {
        let mv = MetricVector::default().with(Metric::Ipc, 3.625);
        let s = summarize_group(&[mv]).unwrap();
        let ipc = &s[Metric::Ipc.index()];
        let b = ipc.spread.unwrap();
        assert_eq!(ipc.geomean, Some(3.625));
        assert_eq!((b.min, b.max), (3.625, 3.625));
        assert!(summarize_group(&[]).is_err());
    }

    #[test]
    fn zeros_are_excluded_from_geomean() {
        let vs: Vec<MetricVector> = [0.0, 1.0, 4.0]
            .iter()
            .map(|&v| MetricVector::default().with(Metric::BranchMpki, v))
            .collect();
        let s = summarize_metric(Metric::BranchMpki, &vs);
        assert_eq!(s.geomean, Some(2.0));
        assert_eq!(s.excluded_zeros, 1);
        assert_eq!(s.available, 3);
    }

    #[test]
    fn metric_table_round_trip() {
        let mut table = MetricTable::new();
        table.insert(
            RunKey::new("s", "w", "m"),
            MetricVector::default().with(Metric::Ipc, 1.0 / 3.0).with(Metric::L1iMpki, 82.3),
        );
        let mut buf = Vec::new();
        write_metric_table(&table, &mut buf).unwrap();
        assert_eq!(read_metric_table(buf.as_slice()).unwrap(), table);
    }
}
