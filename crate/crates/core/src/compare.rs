//! Cross-suite comparison: per-metric geometric-mean ratios and box statistics.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::cluster::escape;
use crate::dataset::MeasurementStore;
use crate::metrics::{Metric, MetricTable, MetricVector};
use crate::stats::{arithmetic_mean, box_stats, geomean_positive, BoxStats, PositiveGeomean};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CompareError {
    #[error("suite `{suite}` has no runs on machine `{machine}`")]
    EmptySuite { suite: String, machine: String },
    #[error("{0}: no positive values")]
    NoPositiveValues(&'static str),
    #[error("{0}: not available in either suite")]
    Unavailable(&'static str),
    #[error("export: {0}")]
    Export(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricComparison {
    pub metric: Metric,
    pub a: PositiveGeomean<f64>,
    pub b: PositiveGeomean<f64>,
    /// `geomean_a / geomean_b`.
    pub ratio: f64,
    pub spread_a: BoxStats<f64>,
    pub spread_b: BoxStats<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteComparison {
    pub suite_a: String,
    pub suite_b: String,
    pub machine: String,
    pub metrics: Vec<MetricComparison>,
    /// Metrics that could not be compared and why.
    pub skipped: Vec<(Metric, CompareError)>,
}

/// Compares one metric given the values of each suite.
pub fn compare_metric(metric: Metric, a: &[f64], b: &[f64]) -> Result<MetricComparison, CompareError> {
    if a.is_empty() && b.is_empty() {
        return Err(CompareError::Unavailable(metric.label()));
    }
    let (ga, gb) = (geomean_positive(a), geomean_positive(b));
    let (Some(va), Some(vb)) = (ga.value, gb.value) else {
        return Err(CompareError::NoPositiveValues(metric.label()));
    };
    Ok(MetricComparison {
        metric,
        a: ga,
        b: gb,
        ratio: va / vb,
        spread_a: box_stats(a).expect("non-empty"),
        spread_b: box_stats(b).expect("non-empty"),
    })
}

fn suite_vectors<'a>(table: &'a MetricTable, suite: &str, machine: &str) -> Vec<&'a MetricVector> {
    table
        .iter()
        .filter(|(k, _)| k.suite == suite && k.machine == machine)
        .map(|(_, v)| v)
        .collect()
}

/// Per-metric comparison of two suites on one machine.
pub fn compare_suites(
    table: &MetricTable,
    suite_a: &str,
    suite_b: &str,
    machine: &str,
) -> Result<SuiteComparison, CompareError> {
    let va = suite_vectors(table, suite_a, machine);
    let vb = suite_vectors(table, suite_b, machine);
    for (suite, v) in [(suite_a, &va), (suite_b, &vb)] {
        if v.is_empty() {
            return Err(CompareError::EmptySuite {
                suite: suite.to_string(),
                machine: machine.to_string(),
            });
        }
    }
    let mut metrics = Vec::new();
    let mut skipped = Vec::new();
    for metric in Metric::ALL {
        let a: Vec<f64> = va.iter().filter_map(|v| v.get(metric)).collect();
        let b: Vec<f64> = vb.iter().filter_map(|v| v.get(metric)).collect();
        match compare_metric(metric, &a, &b) {
            Ok(c) => metrics.push(c),
            Err(e) => skipped.push((metric, e)),
        }
    }
    Ok(SuiteComparison {
        suite_a: suite_a.to_string(),
        suite_b: suite_b.to_string(),
        machine: machine.to_string(),
        metrics,
        skipped,
    })
}

/// Ratio of arithmetic-mean instruction counts, speed over rate.
pub fn instruction_volume_ratio(speed: &[f64], rate: &[f64]) -> Result<f64, CompareError> {
    let empty = |s: &str| CompareError::EmptySuite {
        suite: s.to_string(),
        machine: String::new(),
    };
    let s = arithmetic_mean(speed).ok_or_else(|| empty("speed"))?;
    let r = arithmetic_mean(rate).ok_or_else(|| empty("rate"))?;
    Ok(s / r)
}

/// Retired instruction counts of a suite's runs on one machine.
pub fn instruction_counts(store: &MeasurementStore, suite: &str, machine: &str) -> Vec<f64> {
    store
        .suite_records(suite)
        .filter(|r| r.key.machine == machine)
        .filter_map(|r| r.count("instructions"))
        .collect()
}

impl SuiteComparison {
    pub fn get(&self, metric: Metric) -> Option<&MetricComparison> {
        self.metrics.iter().find(|c| c.metric == metric)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "Machine: {}\n\n| Metric | {a} geomean | {b} geomean | Ratio {a}/{b} | Excluded zeros ({a}/{b}) |\n|---|---|---|---|---|\n",
            self.machine,
            a = self.suite_a,
            b = self.suite_b
        );
        for c in &self.metrics {
            let _ = writeln!(
                s,
                "| {} | {:.4} | {:.4} | {:.3}x | {}/{} |",
                c.metric.label(),
                c.a.value.unwrap_or(f64::NAN),
                c.b.value.unwrap_or(f64::NAN),
                c.ratio,
                c.a.excluded,
                c.b.excluded
            );
        }
        if !self.skipped.is_empty() {
            s.push_str("\nNot compared:\n\n");
            for (_, e) in &self.skipped {
                let _ = writeln!(s, "- {e}");
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), CompareError> {
        let mut s = String::from("metric,suite,geomean,excluded_zeros,min,q1,median,q3,max,ratio\n");
        for c in &self.metrics {
            for (suite, g, b) in [(&self.suite_a, &c.a, &c.spread_a), (&self.suite_b, &c.b, &c.spread_b)] {
                let _ = writeln!(
                    s,
                    "{},{},{:.10},{},{:.10},{:.10},{:.10},{:.10},{:.10},{:.10}",
                    c.metric.key(),
                    suite,
                    g.value.unwrap_or(f64::NAN),
                    g.excluded,
                    b.min,
                    b.q1,
                    b.median,
                    b.q3,
                    b.max,
                    c.ratio
                );
            }
        }
        w.write_all(s.as_bytes()).map_err(|e| CompareError::Export(e.to_string()))
    }

    /// Grid of per-metric box plots, one box per suite, whiskers at min/max.
    pub fn to_svg(&self) -> String {
        let per_row = 4;
        let (pw, ph) = (200.0, 180.0);
        let rows = self.metrics.len().div_ceil(per_row).max(1);
        let width = pw * per_row as f64;
        let height = 40.0 + ph * rows as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{} vs {} ({})</text>"#,
            width / 2.0,
            escape(&self.suite_a),
            escape(&self.suite_b),
            escape(&self.machine)
        );
        for (i, c) in self.metrics.iter().enumerate() {
            let (ox, oy) = (pw * (i % per_row) as f64, 40.0 + ph * (i / per_row) as f64);
            let (top, bottom) = (oy + 24.0, oy + ph - 30.0);
            let hi = c.spread_a.max.max(c.spread_b.max);
            let hi = if hi > 0.0 { hi } else { 1.0 };
            let y = |v: f64| bottom - (bottom - top) * (v / hi);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
                ox + pw / 2.0,
                oy + 14.0,
                escape(c.metric.label())
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{bottom:.1}" x2="{:.1}" y2="{bottom:.1}" stroke="black"/>"#,
                ox + 20.0,
                ox + pw - 20.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="start">max {hi:.3}</text>"#,
                ox + 22.0,
                top - 2.0
            );
            for (j, (name, b, color)) in [
                (&self.suite_a, &c.spread_a, "steelblue"),
                (&self.suite_b, &c.spread_b, "darkorange"),
            ]
            .into_iter()
            .enumerate()
            {
                let cx = ox + pw * (0.33 + 0.34 * j as f64);
                let half = 18.0;
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                    y(b.max),
                    y(b.min)
                );
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.6" stroke="black"/>"#,
                    cx - half,
                    y(b.q3),
                    2.0 * half,
                    (y(b.q1) - y(b.q3)).max(0.5)
                );
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
                    cx - half,
                    y(b.median),
                    cx + half,
                    y(b.median)
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    bottom + 14.0,
                    escape(name)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}
