//! Rolling round-robin proxy mixes under a constant-rate model.
//!
//! Copy `i` of an `M`-copy schedule with offset `o_i` is, at time `t`, at
//! phase `(t - o_i) mod P` of the benchmark sequence, where `P` is the sum of
//! the constituent durations. Copies run from `t = 0` in steady state, so
//! totals over whole periods do not depend on the offsets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::dataset::{RunKey, RunRecord};
use crate::metrics::{derive_metrics, Metric, MetricVector, MetricsError};
use crate::subset::binomial;

#[derive(Debug, Error, PartialEq)]
pub enum ProxyError {
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid profile `{workload}`: {reason}")]
    InvalidProfile { workload: String, reason: String },
    #[error("no metric is weighted and available on both sides")]
    NoCommonMetrics,
    #[error("weight for {0} must be finite and >= 0")]
    InvalidWeight(&'static str),
    #[error("{combinations} candidate mixes exceed the budget of {budget}")]
    BudgetExceeded { combinations: u128, budget: u128 },
    #[error("mix size {k} is not in 1..={pool}")]
    InvalidMixSize { k: usize, pool: usize },
    #[error("mix file line {line}: {reason}")]
    MixFile { line: usize, reason: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("export: {0}")]
    Export(String),
}

/// Average per-second event rates of one workload and its pass duration.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadProfile {
    pub workload: String,
    pub rates: BTreeMap<String, f64>,
    pub duration: f64,
}

impl WorkloadProfile {
    pub fn new(workload: impl Into<String>, rates: BTreeMap<String, f64>, duration: f64) -> Result<Self, ProxyError> {
        let workload = workload.into();
        let bad = |reason: String| ProxyError::InvalidProfile {
            workload: workload.clone(),
            reason,
        };
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(bad(format!("duration {duration} is not positive")));
        }
        if let Some((e, r)) = rates.iter().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
            return Err(bad(format!("rate of {e} is {r}")));
        }
        Ok(WorkloadProfile {
            workload,
            rates,
            duration,
        })
    }

    /// Rates are `count / wallclock_seconds` over the supported events. The
    /// duration defaults to the wallclock time.
    pub fn from_record(record: &RunRecord, duration: Option<f64>) -> Result<Self, ProxyError> {
        let wall = record
            .wallclock_seconds
            .filter(|w| *w > 0.0)
            .ok_or_else(|| ProxyError::InvalidProfile {
                workload: record.key.workload.clone(),
                reason: "no positive wallclock time".into(),
            })?;
        let rates = record
            .counters
            .iter()
            .filter(|(_, c)| c.supported)
            .map(|(e, c)| (e.clone(), c.value / wall))
            .collect();
        Self::new(record.key.workload.clone(), rates, duration.unwrap_or(wall))
    }

    pub fn with_duration(mut self, duration: f64) -> Result<Self, ProxyError> {
        self.duration = duration;
        Self::new(self.workload, self.rates, self.duration)
    }

    /// Metrics of the workload running alone.
    pub fn metrics(&self) -> Result<MetricVector, ProxyError> {
        Ok(derive_metrics(&totals_record(&self.workload, &self.rates))?)
    }
}

fn totals_record(name: &str, totals: &BTreeMap<String, f64>) -> RunRecord {
    let mut r = RunRecord::new(RunKey::new("proxy", name, "rrr"));
    for (e, v) in totals {
        r = r.with_counter(e, *v);
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrrSchedule {
    pub order: Vec<String>,
    pub copies: usize,
    pub offsets: Vec<f64>,
    pub horizon: f64,
}

fn period_of(order: &[String], profiles: &BTreeMap<&str, &WorkloadProfile>) -> Result<f64, ProxyError> {
    order
        .iter()
        .map(|w| {
            profiles
                .get(w.as_str())
                .map(|p| p.duration)
                .ok_or_else(|| ProxyError::UnknownWorkload(w.clone()))
        })
        .sum()
}

fn index(profiles: &[WorkloadProfile]) -> BTreeMap<&str, &WorkloadProfile> {
    profiles.iter().map(|p| (p.workload.as_str(), p)).collect()
}

impl RrrSchedule {
    /// Copy `i` offset by `i * P / M`; horizon one period.
    pub fn staggered(order: Vec<String>, copies: usize, profiles: &[WorkloadProfile]) -> Result<Self, ProxyError> {
        if copies == 0 {
            return Err(ProxyError::InvalidSchedule("at least one copy is required".into()));
        }
        let period = period_of(&order, &index(profiles))?;
        Ok(RrrSchedule {
            offsets: (0..copies).map(|i| i as f64 * period / copies as f64).collect(),
            order,
            copies,
            horizon: period,
        })
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn period(&self, profiles: &[WorkloadProfile]) -> Result<f64, ProxyError> {
        period_of(&self.order, &index(profiles))
    }

    fn validate(&self, period: f64) -> Result<(), ProxyError> {
        let bad = |s: &str| Err(ProxyError::InvalidSchedule(s.into()));
        if self.order.is_empty() {
            return bad("empty benchmark order");
        }
        if self.copies == 0 || self.offsets.len() != self.copies {
            return bad("need one offset per copy and at least one copy");
        }
        if self.offsets.iter().any(|o| !(*o >= 0.0 && *o < period)) {
            return bad("offsets must lie in [0, period)");
        }
        if self.offsets.windows(2).any(|w| w[0] >= w[1]) {
            return bad("offsets must be strictly increasing");
        }
        if !(self.horizon > 0.0) {
            return Err(ProxyError::ZeroHorizon);
        }
        if self.horizon < period * (1.0 - 1e-12) {
            return bad("horizon is shorter than one period");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendProfile {
    pub order: Vec<String>,
    /// System-wide metrics over all copies.
    pub aggregate: MetricVector,
    pub totals: BTreeMap<String, f64>,
    pub per_copy_totals: Vec<BTreeMap<String, f64>>,
    pub per_copy: Vec<MetricVector>,
    /// `time_shares[copy][slot]`; each row sums to 1.
    pub time_shares: Vec<Vec<f64>>,
    pub horizon: f64,
    pub distance_to_target: Option<f64>,
    pub target: Option<(String, MetricVector)>,
}

/// Length of the overlap of `[a, b]` with the periodic interval
/// `[s + kP, s + d + kP]` over all integers `k`.
fn periodic_overlap(a: f64, b: f64, s: f64, d: f64, p: f64) -> f64 {
    let mut k = ((a - s - d) / p).floor();
    let mut total = 0.0;
    loop {
        let lo = s + k * p;
        if lo >= b {
            break;
        }
        total += (b.min(lo + d) - a.max(lo)).max(0.0);
        k += 1.0;
    }
    total
}

pub fn simulate_rrr(profiles: &[WorkloadProfile], schedule: &RrrSchedule) -> Result<BlendProfile, ProxyError> {
    let by_name = index(profiles);
    let period = period_of(&schedule.order, &by_name)?;
    schedule.validate(period)?;
    let slots: Vec<&WorkloadProfile> = schedule.order.iter().map(|w| by_name[w.as_str()]).collect();
    let starts: Vec<f64> = slots
        .iter()
        .scan(0.0, |acc, p| {
            let s = *acc;
            *acc += p.duration;
            Some(s)
        })
        .collect();

    let occupancy: Vec<Vec<f64>> = schedule
        .offsets
        .iter()
        .map(|&o| {
            slots
                .iter()
                .zip(&starts)
                .map(|(p, &s)| periodic_overlap(-o, schedule.horizon - o, s, p.duration, period))
                .collect()
        })
        .collect();

    // An event survives only if every constituent that actually ran reports it.
    let ran: Vec<&WorkloadProfile> = slots
        .iter()
        .enumerate()
        .filter(|(j, _)| occupancy.iter().any(|row| row[*j] > 0.0))
        .map(|(_, p)| *p)
        .collect();
    let events: BTreeSet<&String> = ran
        .first()
        .map(|p| p.rates.keys().filter(|e| ran.iter().all(|q| q.rates.contains_key(*e))).collect())
        .unwrap_or_default();

    let per_copy_totals: Vec<BTreeMap<String, f64>> = occupancy
        .iter()
        .map(|row| {
            events
                .iter()
                .map(|e| {
                    let v = slots.iter().zip(row).map(|(p, t)| p.rates.get(*e).copied().unwrap_or(0.0) * t).sum();
                    ((*e).clone(), v)
                })
                .collect()
        })
        .collect();
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for copy in &per_copy_totals {
        for (e, v) in copy {
            *totals.entry(e.clone()).or_default() += v;
        }
    }
    let per_copy = per_copy_totals
        .iter()
        .enumerate()
        .map(|(i, t)| derive_metrics(&totals_record(&format!("copy{i}"), t)))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = derive_metrics(&totals_record("blend", &totals))?;
    let time_shares = occupancy
        .iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            row.iter().map(|t| t / sum).collect()
        })
        .collect();
    Ok(BlendProfile {
        order: schedule.order.clone(),
        aggregate,
        totals,
        per_copy_totals,
        per_copy,
        time_shares,
        horizon: schedule.horizon,
        distance_to_target: None,
        target: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendDistance {
    pub distance: f64,
    /// `|blend - target| / |target|` for every compared metric with a non-zero target.
    pub relative_gaps: BTreeMap<Metric, f64>,
}

/// Weighted L2 distance over `(blend - target) / scale`. Metrics with zero
/// weight, or unavailable on either side, are left out. A missing or
/// non-positive scale counts as 1.
pub fn blend_distance(
    blend: &MetricVector,
    target: &MetricVector,
    weights: &BTreeMap<Metric, f64>,
    scales: &BTreeMap<Metric, f64>,
) -> Result<BlendDistance, ProxyError> {
    let mut sum = 0.0;
    let mut used = 0;
    let mut relative_gaps = BTreeMap::new();
    for (&m, &w) in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(ProxyError::InvalidWeight(m.label()));
        }
        if w == 0.0 {
            continue;
        }
        let (Some(b), Some(t)) = (blend.get(m), target.get(m)) else {
            continue;
        };
        let scale = scales.get(&m).copied().filter(|s| *s > 0.0).unwrap_or(1.0);
        sum += w * ((b - t) / scale).powi(2);
        used += 1;
        if t != 0.0 {
            relative_gaps.insert(m, (b - t).abs() / t.abs());
        }
    }
    if used == 0 {
        return Err(ProxyError::NoCommonMetrics);
    }
    Ok(BlendDistance {
        distance: sum.sqrt(),
        relative_gaps,
    })
}

pub fn uniform_weights() -> BTreeMap<Metric, f64> {
    Metric::ALL.into_iter().map(|m| (m, 1.0)).collect()
}

impl BlendProfile {
    pub fn with_target(
        mut self,
        name: impl Into<String>,
        target: MetricVector,
        weights: &BTreeMap<Metric, f64>,
        scales: &BTreeMap<Metric, f64>,
    ) -> Result<Self, ProxyError> {
        self.distance_to_target = Some(blend_distance(&self.aggregate, &target, weights, scales)?.distance);
        self.target = Some((name.into(), target));
        Ok(self)
    }

    fn columns<'a>(&'a self, constituents: &'a [(String, MetricVector)]) -> Vec<(&'a str, &'a MetricVector)> {
        let mut cols = vec![("blend", &self.aggregate)];
        if let Some((name, t)) = &self.target {
            cols.push((name.as_str(), t));
        }
        cols.extend(constituents.iter().map(|(n, v)| (n.as_str(), v)));
        cols
    }

    /// Per-metric blend, target and constituent values.
    pub fn to_markdown(&self, constituents: &[(String, MetricVector)]) -> String {
        let cols = self.columns(constituents);
        let mut s = format!("Mix: {}\n\n", self.order.join(", "));
        if let Some(d) = self.distance_to_target {
            let _ = writeln!(s, "Distance to target: {d:.6}\n");
        }
        s.push_str("| Metric |");
        for (n, _) in &cols {
            let _ = write!(s, " {n} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(cols.len()));
        s.push('\n');
        for m in Metric::ALL {
            if cols.iter().all(|(_, v)| v.get(m).is_none()) {
                continue;
            }
            let _ = write!(s, "| {} |", m.label());
            for (_, v) in &cols {
                match v.get(m) {
                    Some(x) => {
                        let _ = write!(s, " {x:.4} |");
                    }
                    None => s.push_str(" - |"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W, constituents: &[(String, MetricVector)]) -> Result<(), ProxyError> {
        let cols = self.columns(constituents);
        let mut s = String::from("metric");
        for (n, _) in &cols {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for m in Metric::ALL {
            s.push_str(m.key());
            for (_, v) in &cols {
                s.push(',');
                if let Some(x) = v.get(m) {
                    let _ = write!(s, "{x:.10}");
                }
            }
            s.push('\n');
        }
        w.write_all(s.as_bytes()).map_err(|e| ProxyError::Export(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedMix {
    pub mix: Vec<String>,
    pub blend: BlendProfile,
    pub distance: f64,
}

/// Exhaustive search over every mix of 1..=k pool members, each run with
/// equal durations on a single copy for one period. Ranked by distance, then
/// size, then names.
pub fn search_mix(
    pool: &[WorkloadProfile],
    target: &MetricVector,
    k: usize,
    weights: &BTreeMap<Metric, f64>,
    scales: &BTreeMap<Metric, f64>,
    budget: u128,
) -> Result<Vec<RankedMix>, ProxyError> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(ProxyError::InvalidMixSize { k, pool: n });
    }
    let combinations = (1..=k).map(|s| binomial(n, s)).fold(0u128, u128::saturating_add);
    if combinations > budget {
        return Err(ProxyError::BudgetExceeded { combinations, budget });
    }
    let mut sorted: Vec<WorkloadProfile> = pool
        .iter()
        .map(|p| p.clone().with_duration(1.0))
        .collect::<Result<_, _>>()?;
    sorted.sort_by(|a, b| a.workload.cmp(&b.workload));
    let mut ranked = Vec::new();
    let mut last_err = None;
    for size in 1..=k {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let mix: Vec<String> = idx.iter().map(|&i| sorted[i].workload.clone()).collect();
            let schedule = RrrSchedule::staggered(mix.clone(), 1, &sorted)?;
            let blend = simulate_rrr(&sorted, &schedule)?;
            match blend_distance(&blend.aggregate, target, weights, scales) {
                Ok(d) => ranked.push(RankedMix {
                    mix,
                    distance: d.distance,
                    blend: BlendProfile {
                        distance_to_target: Some(d.distance),
                        ..blend
                    },
                }),
                Err(e) => last_err = Some(e),
            }
            let Some(pos) = (0..size).rev().find(|&i| idx[i] < n - size + i) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    if ranked.is_empty() {
        return Err(last_err.unwrap_or(ProxyError::NoCommonMetrics));
    }
    ranked.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.mix.len().cmp(&b.mix.len()))
            .then_with(|| a.mix.cmp(&b.mix))
    });
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixEntry {
    pub workload: String,
    pub duration: Option<f64>,
}

/// Parses a mix file: one `workload [duration_seconds]` per line, `#`
/// comments and blank lines ignored. Workloads may appear once.
pub fn parse_mix(text: &str) -> Result<Vec<MixEntry>, ProxyError> {
    let mut out: Vec<MixEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| ProxyError::MixFile { line: i + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let duration = match fields.as_slice() {
            [_] => None,
            [_, d] => {
                let d: f64 = d.parse().map_err(|_| err(format!("bad duration `{d}`")))?;
                if !(d > 0.0 && d.is_finite()) {
                    return Err(err(format!("duration {d} is not positive")));
                }
                Some(d)
            }
            _ => return Err(err("expected `workload [duration]`".into())),
        };
        if out.iter().any(|e| e.workload == fields[0]) {
            return Err(err(format!("duplicate workload `{}`", fields[0])));
        }
        out.push(MixEntry {
            workload: fields[0].to_string(),
            duration,
        });
    }
    if out.is_empty() {
        return Err(ProxyError::MixFile {
            line: 0,
            reason: "no workloads".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(name: &str, ipc: f64, l1i_mpki: f64, duration: f64) -> WorkloadProfile {
        let cycles = 3.0e9;
        let instr = ipc * cycles;
        let rates = BTreeMap::from([
            ("cycles".to_string(), cycles),
            ("instructions".to_string(), instr),
            ("l1i_misses".to_string(), l1i_mpki * instr / 1e3),
        ]);
        WorkloadProfile::new(name, rates, duration).unwrap()
    }

    #[test]
    fn cactus_fotonik_blend() {
        let pool = vec![profile("cactus", 1.696, 82.3, 375.0), profile("fotonik3d", 0.785, 0.24, 536.0)];
        let s = RrrSchedule::staggered(vec!["cactus".into(), "fotonik3d".into()], 2, &pool).unwrap();
        let b = simulate_rrr(&pool, &s).unwrap();
        assert!((b.aggregate.get(Metric::Ipc).unwrap() - 1.16).abs() < 1e-12);
        let l1i = b.aggregate.get(Metric::L1iMpki).unwrap();
        assert!(l1i > 0.24 && l1i < 82.3);
        for row in &b.time_shares {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_wraps() {
        assert_eq!(periodic_overlap(0.0, 10.0, 0.0, 4.0, 10.0), 4.0);
        assert_eq!(periodic_overlap(-3.0, 7.0, 0.0, 4.0, 10.0), 4.0);
        assert_eq!(periodic_overlap(-8.0, 2.0, 4.0, 6.0, 10.0), 6.0);
        assert_eq!(periodic_overlap(0.0, 25.0, 0.0, 4.0, 10.0), 12.0);
    }

    #[test]
    fn schedule_checks() {
        let pool = vec![profile("a", 1.0, 1.0, 1.0)];
        let s = RrrSchedule::staggered(vec!["b".into()], 1, &pool);
        assert_eq!(s.unwrap_err(), ProxyError::UnknownWorkload("b".into()));
        let s = RrrSchedule::staggered(vec!["a".into()], 1, &pool).unwrap().with_horizon(0.0);
        assert_eq!(simulate_rrr(&pool, &s).unwrap_err(), ProxyError::ZeroHorizon);
        let mut s = RrrSchedule::staggered(vec!["a".into()], 2, &pool).unwrap();
        s.offsets = vec![0.5, 0.5];
        assert!(matches!(simulate_rrr(&pool, &s), Err(ProxyError::InvalidSchedule(_))));
    }

    #[test]
    fn distance_and_gaps() {
        let t = MetricVector::default().with(Metric::Ipc, 1.16 / (1.0 - 0.137));
        let b = MetricVector::default().with(Metric::Ipc, 1.16).with(Metric::L1iMpki, 3.0);
        let d = blend_distance(&b, &t, &uniform_weights(), &BTreeMap::new()).unwrap();
        assert!((d.relative_gaps[&Metric::Ipc] - 0.137).abs() < 1e-12);
        assert_eq!(blend_distance(&t, &t, &uniform_weights(), &BTreeMap::new()).unwrap().distance, 0.0);
        let w = BTreeMap::from([(Metric::Ipc, 0.0)]);
        assert_eq!(blend_distance(&b, &t, &w, &BTreeMap::new()).unwrap_err(), ProxyError::NoCommonMetrics);
    }

    #[test]
    fn mix_file() {
        let m = parse_mix("# mix\ncactus 375\n\nfotonik3d\n").unwrap();
        assert_eq!(m[0].duration, Some(375.0));
        assert_eq!(m[1].duration, None);
        assert!(parse_mix("a 1 2").is_err());
        assert!(parse_mix("a\na").is_err());
        assert!(parse_mix("a -1").is_err());
    }

    #[test]
    fn search_bounds() {
        let pool = vec![profile("a", 1.0, 1.0, 1.0)];
        let t = pool[0].metrics().unwrap();
        assert!(matches!(
            search_mix(&pool, &t, 2, &uniform_weights(), &BTreeMap::new(), 10),
            Err(ProxyError::InvalidMixSize { .. })
        ));
        let r = search_mix(&pool, &t, 1, &uniform_weights(), &BTreeMap::new(), 10).unwrap();
        assert_eq!(r[0].distance, 0.0);
    }
}
