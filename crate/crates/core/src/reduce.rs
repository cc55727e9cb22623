//! Principal component analysis over a normalized feature matrix.
//!
//! Components are the right singular vectors of the column-centered data,
//! explained variance is `sigma^2 / (n - 1)`. Each component is oriented so
//! that its largest-magnitude coordinate is positive (lowest index on ties).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::features::{FeatureColumn, FeatureMatrix};
use crate::linalg::right_svd;
use crate::matrix::Matrix;
use crate::metrics::Metric;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("variance target {0} must lie in (0, 1]")]
    TargetUnreachable(f64),
    #[error("requested {requested} components, only {available} available")]
    InvalidComponentCount { requested: usize, available: usize },
    #[error("input matrix must be normalized first")]
    NotNormalized,
    #[error("matrix has {got} columns, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model has no (metric, machine) column labels")]
    UnlabeledColumns,
    #[error("centered matrix has zero variance")]
    ZeroVariance,
    #[error("export: {0}")]
    Export(String),
}

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retention {
    Components(usize),
    /// Smallest k whose cumulative explained ratio reaches the fraction.
    VarianceTarget(f64),
}

impl Default for Retention {
    fn default() -> Self {
        Retention::Components(8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    mean: Vec<T>,
    components: Matrix<T>,
    explained_variance: Vec<T>,
    explained_ratio: Vec<T>,
    spectrum: Vec<T>,
    total_variance: T,
    labels: Option<Vec<FeatureColumn>>,
}

/// Fits PCA to a normalized feature matrix.
pub fn fit_pca<T: Scalar>(matrix: &FeatureMatrix<T>, retention: Retention) -> Result<PcaModel<T>, PcaError> {
    if !matrix.is_normalized() {
        return Err(PcaError::NotNormalized);
    }
    let mut model = PcaModel::fit(matrix.values(), retention)?;
    model.labels = matrix.columns().map(|c| c.to_vec());
    Ok(model)
}

impl<T: Scalar> PcaModel<T> {
    /// Fits PCA to any numeric matrix (rows are observations).
    pub fn fit(values: &Matrix<T>, retention: Retention) -> Result<Self, PcaError> {
        let (n, d) = (values.rows(), values.cols());
        if n < 2 {
            return Err(PcaError::TooFewRows(n));
        }
        if let Retention::VarianceTarget(f) = retention {
            if !(f > 0.0 && f <= 1.0) {
                return Err(PcaError::TargetUnreachable(f));
            }
        }
        let mean: Vec<T> = (0..d)
            .map(|c| values.col(c).into_iter().sum::<T>() / T::of_usize(n))
            .collect();
        let mut centered = values.clone();
        for r in 0..n {
            for (x, &m) in centered.row_mut(r).iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        let sum_sq: T = centered.as_slice().iter().map(|&x| x * x).sum();
        if sum_sq == T::zero() {
            return Err(PcaError::ZeroVariance);
        }
        let svd = right_svd(&centered);
        let dof = T::of_usize(n - 1);
        let spectrum: Vec<T> = svd.singular_values.iter().map(|&s| s * s / dof).collect();
        let total_variance = sum_sq / dof;
        let ratios: Vec<T> = spectrum.iter().map(|&v| v / total_variance).collect();

        let available = spectrum.len();
        let k = match retention {
            Retention::Components(k) => {
                if k == 0 || k > available {
                    return Err(PcaError::InvalidComponentCount { requested: k, available });
                }
                k
            }
            Retention::VarianceTarget(f) => {
                let target = T::of(f);
                let mut cum = T::zero();
                let mut k = available;
                for (i, &r) in ratios.iter().enumerate() {
                    cum += r;
                    if cum >= target {
                        k = i + 1;
                        break;
                    }
                }
                k
            }
        };

        let mut components = Matrix::zeros(k, d);
        for i in 0..k {
            let src = svd.right_vectors.row(i);
            let mut lead = 0;
            for (j, v) in src.iter().enumerate() {
                if v.abs() > src[lead].abs() {
                    lead = j;
                }
            }
            let sign = if src[lead] < T::zero() { -T::one() } else { T::one() };
            for (dst, &v) in components.row_mut(i).iter_mut().zip(src) {
                *dst = v * sign;
            }
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance: spectrum[..k].to_vec(),
            explained_ratio: ratios[..k].to_vec(),
            spectrum,
            total_variance,
            labels: None,
        })
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// `k x d`, one component per row.
    pub fn components(&self) -> &Matrix<T> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[T] {
        &self.explained_variance
    }

    pub fn explained_ratio(&self) -> &[T] {
        &self.explained_ratio
    }

    /// Variance of every component that exists, retained or not.
    pub fn spectrum(&self) -> &[T] {
        &self.spectrum
    }

    pub fn total_variance(&self) -> T {
        self.total_variance
    }

    /// Share of variance outside the retained components.
    pub fn residual_ratio(&self) -> T {
        T::one() - self.explained_ratio.iter().copied().sum::<T>()
    }

    pub fn labels(&self) -> Option<&[FeatureColumn]> {
        self.labels.as_deref()
    }

    /// Scores `(values - mean) * components^T`, one row per input row.
    pub fn project(&self, values: &Matrix<T>) -> Result<Matrix<T>, PcaError> {
        if values.cols() != self.dim() {
            return Err(PcaError::DimensionMismatch {
                expected: self.dim(),
                got: values.cols(),
            });
        }
        let mut centered = values.clone();
        for r in 0..values.rows() {
            for (x, &m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *x -= m;
            }
        }
        Ok(centered.matmul(&self.components.transpose()))
    }

    /// Maps scores back into feature space: `scores * components + mean`.
    pub fn reconstruct(&self, scores: &Matrix<T>) -> Result<Matrix<T>, PcaError> {
        if scores.cols() != self.k() {
            return Err(PcaError::DimensionMismatch {
                expected: self.k(),
                got: scores.cols(),
            });
        }
        let mut out = scores.matmul(&self.components);
        for r in 0..out.rows() {
            for (x, &m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *x += m;
            }
        }
        Ok(out)
    }

    pub fn write_variance_csv<W: Write>(&self, mut w: W) -> Result<(), PcaError> {
        let mut s = String::from("pc,explained_variance,explained_ratio,cumulative_ratio\n");
        let mut cum = T::zero();
        for (i, (&v, &r)) in self.explained_variance.iter().zip(&self.explained_ratio).enumerate() {
            cum += r;
            let _ = writeln!(s, "PC{},{:.10},{:.10},{:.10}", i + 1, v, r, cum);
        }
        w.write_all(s.as_bytes()).map_err(|e| PcaError::Export(e.to_string()))
    }
}

/// Projects a feature matrix (normalized with the same state as the fit).
pub fn project<T: Scalar>(model: &PcaModel<T>, matrix: &FeatureMatrix<T>) -> Result<Matrix<T>, PcaError> {
    model.project(matrix.values())
}

/// Writes `workload,PC1..PCk` rows.
pub fn write_scores_csv<T: Scalar, W: Write>(rows: &[String], scores: &Matrix<T>, mut w: W) -> Result<(), PcaError> {
    let mut s = String::from("workload");
    for i in 0..scores.cols() {
        let _ = write!(s, ",PC{}", i + 1);
    }
    s.push('\n');
    for (name, row) in rows.iter().zip(scores.iter_rows()) {
        s.push_str(name);
        for v in row {
            let _ = write!(s, ",{v:.10}");
        }
        s.push('\n');
    }
    w.write_all(s.as_bytes()).map_err(|e| PcaError::Export(e.to_string()))
}

/// Metric loadings of one component, averaged over machines.
#[derive(Debug, Clone, PartialEq)]
pub struct PcLoadings<T> {
    /// 1-based component number.
    pub pc: usize,
    pub explained_ratio: T,
    /// `(metric, mean signed loading)`, strongest first.
    pub top: Vec<(Metric, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingReport<T> {
    pub pcs: Vec<PcLoadings<T>>,
}

/// Ranks metrics per component by the absolute value of their mean signed
/// loading across machines; ties keep metric order.
pub fn loading_table<T: Scalar>(model: &PcaModel<T>, top_n: usize) -> Result<LoadingReport<T>, PcaError> {
    let labels = model.labels().ok_or(PcaError::UnlabeledColumns)?;
    let pcs = (0..model.k())
        .map(|i| {
            let row = model.components().row(i);
            let mut groups: BTreeMap<Metric, (T, usize)> = BTreeMap::new();
            for (col, &v) in labels.iter().zip(row) {
                let e = groups.entry(col.metric).or_insert((T::zero(), 0));
                e.0 += v;
                e.1 += 1;
            }
            let mut means: Vec<(Metric, T)> = groups
                .into_iter()
                .map(|(m, (sum, count))| (m, sum / T::of_usize(count)))
                .collect();
            means.sort_by(|a, b| {
                b.1.abs()
                    .partial_cmp(&a.1.abs())
                    .expect("finite loadings")
                    .then(a.0.cmp(&b.0))
            });
            means.truncate(top_n);
            PcLoadings {
                pc: i + 1,
                explained_ratio: model.explained_ratio()[i],
                top: means,
            }
        })
        .collect();
    Ok(LoadingReport { pcs })
}

impl<T: Scalar> LoadingReport<T> {
    /// Markdown table: one row per PC, metrics with signed mean loadings.
    pub fn to_markdown(&self) -> String {
        let n = self.pcs.first().map_or(0, |p| p.top.len());
        let mut s = format!("| PC | Top {n} metrics (mean loading over machines) |\n|---|---|\n");
        for pc in &self.pcs {
            let cells: Vec<String> = pc
                .top
                .iter()
                .map(|(m, v)| format!("{} ({:+.2})", m.label(), v.as_f64()))
                .collect();
            let _ = writeln!(s, "| PC{} | {} |", pc.pc, cells.join(", "));
        }
        s
    }
}
