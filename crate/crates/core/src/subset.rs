//! Representative subsets and their geometric-mean score accuracy.
//!
//! For one machine, `err = |GM(subset) - GM(suite)| / GM(suite)` and the
//! accuracy is `1 - err`. Across machines the aggregate is the geometric
//! mean of the per-machine accuracies, defined only when all are positive.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::cluster::{ClusterCut, ClusterError, Dendrogram};
use crate::dataset::MeasurementStore;
use crate::matrix::Matrix;
use crate::Scalar;

pub const DEFAULT_BUDGET: u128 = 2_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SubsetError {
    #[error("score for ({workload}, {machine}) must be positive")]
    NonPositiveScore { workload: String, machine: String },
    #[error("no score for ({workload}, {machine})")]
    MissingScore { workload: String, machine: String },
    #[error("subset is empty")]
    EmptySubset,
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("subset size {k} invalid for a suite of {n}")]
    InvalidSubsetSize { k: usize, n: usize },
    #[error("{combinations} subsets exceed the budget of {budget}")]
    BudgetExceeded { combinations: u128, budget: u128 },
    #[error("score table has no workloads or machines")]
    EmptyTable,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("export: {0}")]
    Export(String),
}

/// Positive per-workload scores of one suite on one or more machines.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<T> {
    suite: String,
    workloads: Vec<String>,
    machines: Vec<String>,
    /// `ln(score)`, machines x workloads.
    log_scores: Matrix<T>,
}

impl<T: Scalar> ScoreTable<T> {
    /// Every `(machine, workload)` pair must have a positive score.
    pub fn new(
        suite: &str,
        workloads: &[String],
        machines: &[String],
        scores: &BTreeMap<(String, String), T>,
    ) -> Result<Self, SubsetError> {
        let workloads: Vec<String> = workloads.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let machines: Vec<String> = machines.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if workloads.is_empty() || machines.is_empty() {
            return Err(SubsetError::EmptyTable);
        }
        let mut log_scores = Matrix::zeros(machines.len(), workloads.len());
        for (mi, m) in machines.iter().enumerate() {
            for (wi, w) in workloads.iter().enumerate() {
                let v = *scores
                    .get(&(m.clone(), w.clone()))
                    .ok_or_else(|| SubsetError::MissingScore { workload: w.clone(), machine: m.clone() })?;
                if !(v > T::zero() && v.is_finite()) {
                    return Err(SubsetError::NonPositiveScore { workload: w.clone(), machine: m.clone() });
                }
                log_scores.set(mi, wi, v.ln());
            }
        }
        Ok(ScoreTable {
            suite: suite.to_string(),
            workloads,
            machines,
            log_scores,
        })
    }

    /// Scores of a single machine.
    pub fn single(suite: &str, machine: &str, scores: &[(&str, T)]) -> Result<Self, SubsetError> {
        let workloads: Vec<String> = scores.iter().map(|(w, _)| w.to_string()).collect();
        let map = scores
            .iter()
            .map(|(w, s)| ((machine.to_string(), w.to_string()), *s))
            .collect();
        Self::new(suite, &workloads, &[machine.to_string()], &map)
    }

    /// Scores of one suite from a store; every run needs a score.
    pub fn from_store(store: &MeasurementStore, suite: &str) -> Result<Self, SubsetError> {
        let mut map = BTreeMap::new();
        let mut workloads = BTreeSet::new();
        let mut machines = BTreeSet::new();
        for rec in store.suite_records(suite) {
            workloads.insert(rec.key.workload.clone());
            machines.insert(rec.key.machine.clone());
            let score = rec.score.ok_or_else(|| SubsetError::MissingScore {
                workload: rec.key.workload.clone(),
                machine: rec.key.machine.clone(),
            })?;
            map.insert((rec.key.machine.clone(), rec.key.workload.clone()), T::of(score));
        }
        let workloads: Vec<String> = workloads.into_iter().collect();
        let machines: Vec<String> = machines.into_iter().collect();
        Self::new(suite, &workloads, &machines, &map)
    }

    pub fn suite(&self) -> &str {
        &self.suite
    }

    /// Workloads in lexicographic order.
    pub fn workloads(&self) -> &[String] {
        &self.workloads
    }

    pub fn machines(&self) -> &[String] {
        &self.machines
    }

    /// Geometric mean score over the given workload indices on one machine.
    fn gm(&self, machine: usize, idx: &[usize]) -> T {
        let row = self.log_scores.row(machine);
        let sum: T = idx.iter().map(|&i| row[i]).sum();
        (sum / T::of_usize(idx.len())).exp()
    }

    fn indices(&self, subset: &[String]) -> Result<Vec<usize>, SubsetError> {
        if subset.is_empty() {
            return Err(SubsetError::EmptySubset);
        }
        let mut idx = BTreeSet::new();
        for w in subset {
            let i = self
                .workloads
                .iter()
                .position(|x| x == w)
                .ok_or_else(|| SubsetError::UnknownWorkload(w.clone()))?;
            idx.insert(i);
        }
        Ok(idx.into_iter().collect())
    }

    fn accuracies(&self, idx: &[usize], all: &[usize]) -> Vec<T> {
        (0..self.machines.len())
            .map(|m| {
                let suite = self.gm(m, all);
                let sub = self.gm(m, idx);
                T::one() - (sub - suite).abs() / suite
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetReport<T> {
    pub suite: String,
    pub subset: Vec<String>,
    /// `(machine, accuracy)` with accuracy as a fraction (1 = 100%).
    pub per_machine: Vec<(String, T)>,
    pub aggregate: Option<T>,
    pub oracle_best: Option<(Vec<String>, Option<T>)>,
    pub runtime_fraction: Option<T>,
}

impl<T: Scalar> SubsetReport<T> {
    /// Ranking key: any fully positive aggregate beats none; ties on the
    /// fallback are broken by the arithmetic mean accuracy.
    pub fn objective(&self) -> (bool, T) {
        match self.aggregate {
            Some(a) => (true, a),
            None => {
                let sum: T = self.per_machine.iter().map(|(_, a)| *a).sum();
                (false, sum / T::of_usize(self.per_machine.len().max(1)))
            }
        }
    }

    pub fn accuracy_on(&self, machine: &str) -> Option<T> {
        self.per_machine.iter().find(|(m, _)| m == machine).map(|(_, a)| *a)
    }
}

fn aggregate<T: Scalar>(acc: &[T]) -> Option<T> {
    if acc.iter().all(|a| *a > T::zero()) {
        let sum: T = acc.iter().map(|a| a.ln()).sum();
        Some((sum / T::of_usize(acc.len())).exp().min(T::one()))
    } else {
        None
    }
}

fn compare_objective<T: Scalar>(a: (bool, T), b: (bool, T)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
}

/// Accuracy of `subset` against the whole suite on every machine.
///
/// `wallclock` (seconds per workload) enables the runtime fraction.
pub fn evaluate_subset<T: Scalar>(
    table: &ScoreTable<T>,
    subset: &[String],
    wallclock: Option<&BTreeMap<String, T>>,
) -> Result<SubsetReport<T>, SubsetError> {
    let idx = table.indices(subset)?;
    let all: Vec<usize> = (0..table.workloads.len()).collect();
    let acc = table.accuracies(&idx, &all);
    let runtime_fraction = wallclock.and_then(|wc| {
        let total: Option<T> = table.workloads.iter().map(|w| wc.get(w).copied()).sum();
        let part: Option<T> = idx.iter().map(|&i| wc.get(&table.workloads[i]).copied()).sum();
        match (part, total) {
            (Some(p), Some(t)) if t > T::zero() => Some(p / t),
            _ => None,
        }
    });
    let mut seen = BTreeSet::new();
    let subset: Vec<String> = subset.iter().filter(|w| seen.insert(w.as_str())).cloned().collect();
    Ok(SubsetReport {
        suite: table.suite.clone(),
        subset,
        aggregate: aggregate(&acc),
        per_machine: table.machines.iter().cloned().zip(acc).collect(),
        oracle_best: None,
        runtime_fraction,
    })
}

/// Number of k-subsets of n, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Indices, ranking key and per-machine accuracies of a candidate subset.
type Candidate<T> = (Vec<usize>, (bool, T), Vec<T>);

/// Exhaustive search for the k-subset with the best aggregate accuracy.
/// Subsets are visited in lexicographic order and only a strictly better
/// one replaces the incumbent.
pub fn oracle_best_subset<T: Scalar>(
    table: &ScoreTable<T>,
    k: usize,
    budget: u128,
) -> Result<SubsetReport<T>, SubsetError> {
    let n = table.workloads.len();
    if k == 0 || k > n {
        return Err(SubsetError::InvalidSubsetSize { k, n });
    }
    let combinations = binomial(n, k);
    if combinations > budget {
        return Err(SubsetError::BudgetExceeded { combinations, budget });
    }
    let all: Vec<usize> = (0..n).collect();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<Candidate<T>> = None;
    loop {
        let acc = table.accuracies(&idx, &all);
        let agg = aggregate(&acc);
        let obj = match agg {
            Some(a) => (true, a),
            None => (false, acc.iter().copied().sum::<T>() / T::of_usize(acc.len())),
        };
        if best
            .as_ref()
            .is_none_or(|(_, b, _)| compare_objective(obj, *b) == Ordering::Greater)
        {
            best = Some((idx.clone(), obj, acc));
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let (idx, _, acc) = best.expect("at least one combination");
    Ok(SubsetReport {
        suite: table.suite.clone(),
        subset: idx.iter().map(|&i| table.workloads[i].clone()).collect(),
        aggregate: aggregate(&acc),
        per_machine: table.machines.iter().cloned().zip(acc).collect(),
        oracle_best: None,
        runtime_fraction: None,
    })
}

/// Medoid-based selection together with the cut it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub cut: ClusterCut<T>,
    pub report: SubsetReport<T>,
}

/// Cuts the dendrogram into `target_groups` groups, takes each group's
/// medoid in score space and evaluates the resulting subset.
pub fn select_representatives<T: Scalar>(
    dendrogram: &Dendrogram<T>,
    scores: &Matrix<T>,
    target_groups: usize,
    table: &ScoreTable<T>,
    wallclock: Option<&BTreeMap<String, T>>,
) -> Result<Selection<T>, SubsetError> {
    let cut = dendrogram.cut_groups(target_groups)?.with_medoids(dendrogram, scores)?;
    let report = evaluate_subset(table, &cut.medoids, wallclock)?;
    Ok(Selection { cut, report })
}

fn pct<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |a| format!("{:.2}%", a.as_f64() * 100.0))
}

/// Markdown table with one row per suite: subset, accuracy, runtime share.
pub fn reports_to_markdown<T: Scalar>(reports: &[SubsetReport<T>]) -> String {
    let with_oracle = reports.iter().any(|r| r.oracle_best.is_some());
    let mut s = String::from("| Group | Subset workloads | Accuracy | Runtime fraction |");
    if with_oracle {
        s.push_str(" Oracle best subset | Oracle accuracy |");
    }
    s.push_str("\n|---|---|---|---|");
    if with_oracle {
        s.push_str("---|---|");
    }
    s.push('\n');
    for r in reports {
        let acc = match r.aggregate {
            Some(a) => pct(Some(a)),
            None => r
                .per_machine
                .iter()
                .map(|(m, a)| format!("{m}: {}", pct(Some(*a))))
                .collect::<Vec<_>>()
                .join(", "),
        };
        let _ = write!(
            s,
            "| {} | {} | {} | {} |",
            r.suite,
            r.subset.join(", "),
            acc,
            r.runtime_fraction
                .map_or_else(|| "n/a".to_string(), |f| format!("{:.3}", f.as_f64()))
        );
        if with_oracle {
            match &r.oracle_best {
                Some((subset, a)) => {
                    let _ = write!(s, " {} | {} |", subset.join(", "), pct(*a));
                }
                None => s.push_str(" n/a | n/a |"),
            }
        }
        s.push('\n');
    }
    s
}

/// CSV `suite,kind,subset,machine,accuracy`; `machine` is `*` for the aggregate.
pub fn write_reports_csv<T: Scalar, W: Write>(reports: &[SubsetReport<T>], mut w: W) -> Result<(), SubsetError> {
    let mut s = String::from("suite,kind,subset,machine,accuracy\n");
    let fmt = |v: Option<T>| v.map_or_else(String::new, |a| format!("{:.10}", a.as_f64()));
    for r in reports {
        let joined = r.subset.join(";");
        for (m, a) in &r.per_machine {
            let _ = writeln!(s, "{},medoid,{joined},{m},{}", r.suite, fmt(Some(*a)));
        }
        let _ = writeln!(s, "{},medoid,{joined},*,{}", r.suite, fmt(r.aggregate));
        if let Some((subset, a)) = &r.oracle_best {
            let _ = writeln!(s, "{},oracle,{},*,{}", r.suite, subset.join(";"), fmt(*a));
        }
    }
    w.write_all(s.as_bytes()).map_err(|e| SubsetError::Export(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_case_two_and_eight() {
        let t = ScoreTable::single("s", "m", &[("a", 2.0_f64), ("b", 8.0)]).unwrap();
        let r = evaluate_subset(&t, &names(&["a"]), None).unwrap();
        assert_eq!(r.per_machine[0].1, 0.5);
        assert_eq!(r.aggregate, Some(0.5));
        let full = evaluate_subset(&t, &names(&["b", "a"]), None).unwrap();
        assert_eq!(full.aggregate, Some(1.0));
    }

    #[test]
    fn errors() {
        let t = ScoreTable::single("s", "m", &[("a", 2.0_f64), ("b", 8.0)]).unwrap();
        assert_eq!(evaluate_subset(&t, &[], None).unwrap_err(), SubsetError::EmptySubset);
        assert_eq!(
            evaluate_subset(&t, &names(&["z"]), None).unwrap_err(),
            SubsetError::UnknownWorkload("z".into())
        );
        assert!(matches!(
            ScoreTable::single("s", "m", &[("a", 0.0_f64)]),
            Err(SubsetError::NonPositiveScore { .. })
        ));
        assert!(matches!(oracle_best_subset(&t, 3, DEFAULT_BUDGET), Err(SubsetError::InvalidSubsetSize { .. })));
        assert!(matches!(oracle_best_subset(&t, 1, 1), Err(SubsetError::BudgetExceeded { combinations: 2, .. })));
    }

    #[test]
    fn oracle_tie_goes_to_first_subset() {
        let t = ScoreTable::single("s", "m", &[("b", 8.0_f64), ("a", 2.0)]).unwrap();
        let best = oracle_best_subset(&t, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(best.subset, names(&["a"]));
        assert_eq!(best.aggregate, Some(0.5));
        let full = oracle_best_subset(&t, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(full.aggregate, Some(1.0));
    }

    #[test]
    fn negative_accuracy_has_no_aggregate() {
        let t = ScoreTable::single("s", "m", &[("a", 1.0_f64), ("b", 1.0), ("c", 1000.0)]).unwrap();
        let r = evaluate_subset(&t, &names(&["c"]), None).unwrap();
        assert!(r.per_machine[0].1 < 0.0);
        assert_eq!(r.aggregate, None);
        assert!(!r.objective().0);
    }

    #[test]
    fn runtime_fraction() {
        let t = ScoreTable::single("s", "m", &[("a", 2.0_f64), ("b", 8.0)]).unwrap();
        let wc: BTreeMap<String, f64> = [("a".to_string(), 100.0), ("b".to_string(), 300.0)].into();
        let r = evaluate_subset(&t, &names(&["a"]), Some(&wc)).unwrap();
        assert_eq!(r.runtime_fraction, Some(0.25));
        let full = evaluate_subset(&t, &names(&["a", "b"]), Some(&wc)).unwrap();
        assert_eq!(full.runtime_fraction, Some(1.0));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 4), 210);
        assert_eq!(binomial(52, 5), 2_598_960);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn markdown_shape() {
        let t = ScoreTable::single("int_rate", "m", &[("a", 2.0_f64), ("b", 8.0)]).unwrap();
        let r = evaluate_subset(&t, &names(&["a"]), None).unwrap();
        let md = reports_to_markdown(&[r]);
        assert!(md.contains("| int_rate | a | 50.00% | n/a |"));
    }
}
