//! Cross-machine feature matrix: one row per workload, one column per
//! `(metric, machine)` pair, with per-column z-score normalization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use thiserror::Error;

use crate::matrix::Matrix;
use crate::metrics::{Metric, MetricTable, MetricVector};
use crate::stats::mean_and_pop_stdev;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("no metric vector for ({workload}, {machine})")]
    MissingCell { workload: String, machine: String },
    #[error("no workloads, machines or usable columns")]
    EmptyInput,
    #[error("matrix is already normalized")]
    AlreadyNormalized,
    #[error("matrix is not normalized")]
    NotNormalized,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("feature csv: {0}")]
    Csv(String),
}

/// Column label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureColumn {
    pub metric: Metric,
    pub machine: String,
}

impl fmt::Display for FeatureColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.metric.label(), self.machine)
    }
}

impl FeatureColumn {
    pub fn parse(s: &str) -> Option<Self> {
        let (metric, machine) = s.split_once(':')?;
        Some(FeatureColumn {
            metric: Metric::from_key(metric)?,
            machine: machine.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: Vec<String>,
    cols: Option<Vec<FeatureColumn>>,
    values: Matrix<T>,
    col_means: Vec<T>,
    col_stdevs: Vec<T>,
    constant: Vec<bool>,
    normalized: bool,
    dropped: Vec<FeatureColumn>,
}

/// Metric vectors keyed by `(workload, machine)`.
pub type CellMap = BTreeMap<(String, String), MetricVector>;

/// Collects the cells of one suite from a metric table.
pub fn suite_cells(table: &MetricTable, suite: &str) -> CellMap {
    table
        .iter()
        .filter(|(k, _)| k.suite == suite)
        .map(|(k, v)| ((k.workload.clone(), k.machine.clone()), *v))
        .collect()
}

/// Assembles the raw (unnormalized) matrix.
///
/// Columns are ordered metric-major, then by the given machine order. A
/// `(metric, machine)` column is dropped if any workload lacks the metric on
/// that machine; the drops are kept in [`FeatureMatrix::dropped`].
pub fn build_matrix<T: Scalar>(
    cells: &CellMap,
    workloads: &[String],
    machines: &[String],
) -> Result<FeatureMatrix<T>, FeatureError> {
    if workloads.is_empty() || machines.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut rows_of_vectors = Vec::with_capacity(workloads.len());
    for w in workloads {
        let mut per_machine = Vec::with_capacity(machines.len());
        for m in machines {
            let mv = cells
                .get(&(w.clone(), m.clone()))
                .ok_or_else(|| FeatureError::MissingCell {
                    workload: w.clone(),
                    machine: m.clone(),
                })?;
            per_machine.push(mv);
        }
        rows_of_vectors.push(per_machine);
    }

    let mut cols = Vec::new();
    let mut dropped = Vec::new();
    for metric in Metric::ALL {
        for (mi, machine) in machines.iter().enumerate() {
            let col = FeatureColumn {
                metric,
                machine: machine.clone(),
            };
            if rows_of_vectors.iter().all(|r| r[mi].get(metric).is_some()) {
                cols.push((col, mi));
            } else {
                dropped.push(col);
            }
        }
    }
    if cols.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut values = Matrix::zeros(workloads.len(), cols.len());
    for (r, per_machine) in rows_of_vectors.iter().enumerate() {
        for (c, (col, mi)) in cols.iter().enumerate() {
            let v = per_machine[*mi].get(col.metric).expect("checked above");
            if !v.is_finite() {
                return Err(FeatureError::NonFinite { row: r, col: c });
            }
            values.set(r, c, T::of(v));
        }
    }
    let labels = cols.into_iter().map(|(c, _)| c).collect();
    let mut fm = FeatureMatrix::from_values(workloads.to_vec(), values)?;
    fm.cols = Some(labels);
    fm.dropped = dropped;
    Ok(fm)
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Unlabeled raw matrix.
    pub fn from_values(rows: Vec<String>, values: Matrix<T>) -> Result<Self, FeatureError> {
        assert_eq!(rows.len(), values.rows(), "row labels do not match matrix");
        if values.rows() == 0 || values.cols() == 0 {
            return Err(FeatureError::EmptyInput);
        }
        for r in 0..values.rows() {
            for c in 0..values.cols() {
                if !values.get(r, c).is_finite() {
                    return Err(FeatureError::NonFinite { row: r, col: c });
                }
            }
        }
        let d = values.cols();
        Ok(FeatureMatrix {
            rows,
            cols: None,
            values,
            col_means: vec![T::zero(); d],
            col_stdevs: vec![T::one(); d],
            constant: vec![false; d],
            normalized: false,
            dropped: Vec::new(),
        })
    }

    /// Labeled raw matrix.
    pub fn from_labeled(rows: Vec<String>, cols: Vec<FeatureColumn>, values: Matrix<T>) -> Result<Self, FeatureError> {
        assert_eq!(cols.len(), values.cols(), "column labels do not match matrix");
        let mut fm = Self::from_values(rows, values)?;
        fm.cols = Some(cols);
        Ok(fm)
    }

    /// Anonymous rows `r0, r1, ...`; handy for purely numeric use.
    pub fn anonymous(values: Matrix<T>) -> Result<Self, FeatureError> {
        let rows = (0..values.rows()).map(|i| format!("r{i}")).collect();
        Self::from_values(rows, values)
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> Option<&[FeatureColumn]> {
        self.cols.as_deref()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn col_means(&self) -> &[T] {
        &self.col_means
    }

    pub fn col_stdevs(&self) -> &[T] {
        &self.col_stdevs
    }

    /// Columns that had zero spread when normalized.
    pub fn constant_columns(&self) -> &[bool] {
        &self.constant
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dropped(&self) -> &[FeatureColumn] {
        &self.dropped
    }

    /// Per-column z-score with the population standard deviation.
    ///
    /// Constant columns become all-zero and are flagged; their stdev is
    /// recorded as 0 so [`denormalize`](Self::denormalize) restores them.
    pub fn normalize(&self) -> Result<Self, FeatureError> {
        if self.normalized {
            return Err(FeatureError::AlreadyNormalized);
        }
        let n = self.values.rows();
        if n < 2 {
            return Err(FeatureError::TooFewRows(n));
        }
        let d = self.values.cols();
        let mut out = self.clone();
        for c in 0..d {
            let col = self.values.col(c);
            let (mean, sd) = mean_and_pop_stdev(&col).expect("n >= 2");
            let constant = sd == T::zero() || sd <= mean.abs() * T::epsilon() * T::of(16.0);
            for (r, &x) in col.iter().enumerate() {
                let z = if constant { T::zero() } else { (x - mean) / sd };
                out.values.set(r, c, z);
            }
            out.col_means[c] = mean;
            out.col_stdevs[c] = if constant { T::zero() } else { sd };
            out.constant[c] = constant;
        }
        out.normalized = true;
        Ok(out)
    }

    /// Recovers raw values from a normalized matrix.
    pub fn denormalize(&self) -> Result<Self, FeatureError> {
        if !self.normalized {
            return Err(FeatureError::NotNormalized);
        }
        let mut out = self.clone();
        for r in 0..self.values.rows() {
            for c in 0..self.values.cols() {
                let v = self.values.get(r, c) * self.col_stdevs[c] + self.col_means[c];
                out.values.set(r, c, v);
            }
        }
        out.col_means = vec![T::zero(); self.values.cols()];
        out.col_stdevs = vec![T::one(); self.values.cols()];
        out.constant = vec![false; self.values.cols()];
        out.normalized = false;
        Ok(out)
    }

    /// Writes the raw values as CSV with a `metric:machine` header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let raw = if self.normalized { self.denormalize()? } else { self.clone() };
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["workload".to_string()];
        match &self.cols {
            Some(cols) => header.extend(cols.iter().map(|c| c.to_string())),
            None => header.extend((0..self.values.cols()).map(|c| format!("c{c}"))),
        }
        out.write_record(&header).map_err(err)?;
        for (r, name) in self.rows.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(raw.values.row(r).iter().map(|v| format!("{v}")));
            out.write_record(&row).map_err(err)?;
        }
        out.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }

    /// Reads a raw matrix written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(r: R) -> Result<Self, FeatureError> {
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers().map_err(err)?.clone();
        let labels: Option<Vec<FeatureColumn>> = headers.iter().skip(1).map(FeatureColumn::parse).collect();
        let d = headers.len().saturating_sub(1);
        let mut rows = Vec::new();
        let mut data = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            if rec.len() != d + 1 {
                return Err(FeatureError::Csv(format!("row `{}` has {} cells", &rec[0], rec.len())));
            }
            rows.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                let v: f64 = cell.parse().map_err(|_| FeatureError::Csv(format!("bad value `{cell}`")))?;
                data.push(T::of(v));
            }
        }
        let values = Matrix::from_vec(rows.len(), d, data);
        match labels {
            Some(cols) if d > 0 => Self::from_labeled(rows, cols, values),
            _ => Self::from_values(rows, values),
        }
    }
}

/// Population standard deviation of each metric over a pool of vectors.
/// Metrics with fewer than two values or zero spread are left out.
pub fn metric_scales(vectors: &[MetricVector]) -> BTreeMap<Metric, f64> {
    Metric::ALL
        .into_iter()
        .filter_map(|m| {
            let vals: Vec<f64> = vectors.iter().filter_map(|v| v.get(m)).collect();
            if vals.len() < 2 {
                return None;
            }
            let (_, sd) = mean_and_pop_stdev(&vals)?;
            (sd > 0.0).then_some((m, sd))
        })
        .collect()
}
