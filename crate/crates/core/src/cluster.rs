//! Agglomerative hierarchical clustering in PCA score space.
//!
//! Cluster distances are maintained with Lance-Williams updates over the
//! Euclidean distance matrix. Equal-height candidates are resolved by the
//! smallest leaf index contained in either cluster, then in the other.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::matrix::{euclidean, Matrix};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("{labels} labels for {rows} rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("cannot cut {leaves} leaves into {groups} groups")]
    InvalidGroupCount { groups: usize, leaves: usize },
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("unknown linkage `{0}` (expected ward, average, complete or single)")]
    UnknownLinkage(String),
    #[error("export: {0}")]
    Export(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    /// Minimum variance; heights are `sqrt(2 na nb / (na + nb)) * |ca - cb|`.
    #[default]
    Ward,
    Average,
    Complete,
    Single,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Ward, Linkage::Average, Linkage::Complete, Linkage::Single];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Linkage::ALL
            .into_iter()
            .find(|l| l.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ClusterError::UnknownLinkage(s.to_string()))
    }
}

/// One merge. Nodes `0..n` are leaves, node `n + i` is the result of merge `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge<T> {
    pub left: usize,
    pub right: usize,
    pub height: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram<T> {
    leaves: Vec<String>,
    merges: Vec<Merge<T>>,
    linkage: Linkage,
}

#[derive(Clone, Copy)]
struct Active {
    node: usize,
    size: usize,
    min_leaf: usize,
}

/// Builds the full merge tree of the rows of `scores`.
pub fn build_dendrogram<T: Scalar>(
    scores: &Matrix<T>,
    labels: &[String],
    linkage: Linkage,
) -> Result<Dendrogram<T>, ClusterError> {
    let n = scores.rows();
    if labels.len() != n {
        return Err(ClusterError::LabelMismatch { labels: labels.len(), rows: n });
    }
    if n < 2 {
        return Err(ClusterError::TooFewRows(n));
    }
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(scores.row(i), scores.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active: Vec<Option<Active>> = (0..n)
        .map(|i| Some(Active { node: i, size: 1, min_leaf: i }))
        .collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(T, usize, usize, usize, usize)> = None;
        for i in 0..n {
            let Some(a) = active[i] else { continue };
            for j in (i + 1)..n {
                let Some(b) = active[j] else { continue };
                let d = dist[i * n + j];
                let (lo, hi) = (a.min_leaf.min(b.min_leaf), a.min_leaf.max(b.min_leaf));
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => d < bd || (d == bd && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((d, lo, hi, i, j));
                }
            }
        }
        let (height, _, _, i, j) = best.expect("at least two active clusters");
        let (a, b) = (active[i].expect("active"), active[j].expect("active"));
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let Some(c) = active[k] else { continue };
            let (dki, dkj) = (dist[k * n + i], dist[k * n + j]);
            let updated = lance_williams(linkage, dki, dkj, height, a.size, b.size, c.size);
            dist[k * n + i] = updated;
            dist[i * n + k] = updated;
        }
        merges.push(Merge {
            left: a.node.min(b.node),
            right: a.node.max(b.node),
            height,
            size: a.size + b.size,
        });
        active[i] = Some(Active {
            node: n + step,
            size: a.size + b.size,
            min_leaf: a.min_leaf.min(b.min_leaf),
        });
        active[j] = None;
    }
    Ok(Dendrogram {
        leaves: labels.to_vec(),
        merges,
        linkage,
    })
}

fn lance_williams<T: Scalar>(linkage: Linkage, dki: T, dkj: T, dij: T, ni: usize, nj: usize, nk: usize) -> T {
    match linkage {
        Linkage::Single => dki.min(dkj),
        Linkage::Complete => dki.max(dkj),
        Linkage::Average => {
            let (ni, nj) = (T::of_usize(ni), T::of_usize(nj));
            (ni * dki + nj * dkj) / (ni + nj)
        }
        Linkage::Ward => {
            let (ni, nj, nk) = (T::of_usize(ni), T::of_usize(nj), T::of_usize(nk));
            let v = ((ni + nk) * dki * dki + (nj + nk) * dkj * dkj - nk * dij * dij) / (ni + nj + nk);
            v.max(T::zero()).sqrt()
        }
    }
}

/// A flat partition of the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCut<T> {
    /// Cut height, `None` when cut to a group count.
    pub threshold: Option<T>,
    /// Leaf indices per group, groups ordered by their smallest leaf.
    pub groups: Vec<Vec<usize>>,
    /// One workload per group once [`with_medoids`](ClusterCut::with_medoids) ran.
    pub medoids: Vec<String>,
}

impl<T: Scalar> Dendrogram<T> {
    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge<T>] {
        &self.merges
    }

    pub fn linkage(&self) -> Linkage {
        self.linkage
    }

    pub fn root_height(&self) -> T {
        self.merges.last().map_or(T::zero(), |m| m.height)
    }

    /// Leaf set of a node.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let n = self.leaves.len();
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let m = &self.merges[x - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out.sort_unstable();
        out
    }

    fn partition<'a>(&'a self, applied: impl Iterator<Item = &'a Merge<T>>) -> Vec<Vec<usize>> {
        let n = self.leaves.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for m in applied {
            let a = self.members(m.left)[0];
            let b = self.members(m.right)[0];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for leaf in 0..n {
            let r = find(&mut parent, leaf);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(leaf);
        }
        groups
    }

    /// Groups joined by merges strictly below `threshold`.
    pub fn cut(&self, threshold: T) -> ClusterCut<T> {
        ClusterCut {
            threshold: Some(threshold),
            groups: self.partition(self.merges.iter().filter(|m| m.height < threshold)),
            medoids: Vec::new(),
        }
    }

    /// Applies the first `n - groups` merges.
    pub fn cut_groups(&self, groups: usize) -> Result<ClusterCut<T>, ClusterError> {
        let n = self.leaves.len();
        if groups == 0 || groups > n {
            return Err(ClusterError::InvalidGroupCount { groups, leaves: n });
        }
        Ok(ClusterCut {
            threshold: None,
            groups: self.partition(self.merges[..n - groups].iter()),
            medoids: Vec::new(),
        })
    }

    /// Leaves in drawing order (depth first, left before right).
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaves.len();
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut out = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let m = &self.merges[x - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }

    /// Merge list as CSV `left,right,height,size`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ClusterError> {
        let mut s = String::from("left,right,height,size\n");
        for m in &self.merges {
            let _ = writeln!(s, "{},{},{:.10},{}", m.left, m.right, m.height, m.size);
        }
        w.write_all(s.as_bytes()).map_err(|e| ClusterError::Export(e.to_string()))
    }

    /// Static SVG rendering with rotated leaf labels and an optional cut line.
    pub fn to_svg(&self, title: &str, cut_height: Option<T>) -> String {
        let n = self.leaves.len();
        let order = self.leaf_order();
        let (left, top, plot_h, step, label_h) = (60.0, 40.0, 300.0, 28.0, 150.0);
        let width = left + step * n as f64 + 20.0;
        let height = top + plot_h + label_h;
        let max_h = self.root_height().as_f64().max(f64::MIN_POSITIVE);
        let y_of = |h: f64| top + plot_h * (1.0 - h / max_h);
        let mut x_pos = vec![0.0; n + self.merges.len()];
        for (slot, &leaf) in order.iter().enumerate() {
            x_pos[leaf] = left + step * (slot as f64 + 0.5);
        }
        let mut h_pos = vec![0.0; n + self.merges.len()];

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            width / 2.0,
            escape(title)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{left:.1}" y1="{top:.1}" x2="{left:.1}" y2="{:.1}" stroke="black"/>"#,
            top + plot_h
        );
        for tick in 0..=4 {
            let h = max_h * f64::from(tick) / 4.0;
            let y = y_of(h);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{h:.2}</text>"#,
                left - 4.0,
                y + 4.0
            );
        }
        for (i, m) in self.merges.iter().enumerate() {
            let node = n + i;
            let h = m.height.as_f64();
            let (xl, xr) = (x_pos[m.left], x_pos[m.right]);
            let (yl, yr, y) = (y_of(h_pos[m.left]), y_of(h_pos[m.right]), y_of(h));
            let _ = writeln!(
                s,
                r#"<path d="M{xl:.1},{yl:.1} V{y:.1} H{xr:.1} V{yr:.1}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#
            );
            x_pos[node] = (xl + xr) / 2.0;
            h_pos[node] = h;
        }
        if let Some(c) = cut_height {
            let y = y_of(c.as_f64().min(max_h));
            let _ = writeln!(
                s,
                r#"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="firebrick" stroke-dasharray="6,4"/>"#,
                width - 20.0
            );
        }
        for &leaf in &order {
            let x = x_pos[leaf];
            let y = top + plot_h + 8.0;
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{y:.1}" transform="rotate(60 {x:.1} {y:.1})">{}</text>"#,
                escape(&self.leaves[leaf])
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Group member with the smallest mean Euclidean distance to the others.
/// Ties go to the lexicographically smallest workload id.
pub fn medoid<T: Scalar>(group: &[String], labels: &[String], scores: &Matrix<T>) -> Result<String, ClusterError> {
    if group.is_empty() {
        return Err(ClusterError::EmptyGroup);
    }
    let idx: Vec<usize> = group
        .iter()
        .map(|w| {
            labels
                .iter()
                .position(|l| l == w)
                .ok_or_else(|| ClusterError::UnknownWorkload(w.clone()))
        })
        .collect::<Result<_, _>>()?;
    if idx.len() == 1 {
        return Ok(group[0].clone());
    }
    let mut order: Vec<usize> = (0..idx.len()).collect();
    order.sort_by(|&a, &b| group[a].cmp(&group[b]));
    let others = T::of_usize(idx.len() - 1);
    let mut best: Option<(T, usize)> = None;
    for &a in &order {
        let mean = idx
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(_, &j)| euclidean(scores.row(idx[a]), scores.row(j)))
            .sum::<T>()
            / others;
        if best.is_none_or(|(d, _)| mean < d) {
            best = Some((mean, a));
        }
    }
    Ok(group[best.expect("non-empty").1].clone())
}

impl<T: Scalar> ClusterCut<T> {
    pub fn group_names(&self, leaves: &[String]) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| leaves[i].clone()).collect())
            .collect()
    }

    /// Fills `medoids` from the score rows of the dendrogram's leaves.
    pub fn with_medoids(mut self, dendrogram: &Dendrogram<T>, scores: &Matrix<T>) -> Result<Self, ClusterError> {
        let leaves = dendrogram.leaves();
        self.medoids = self
            .group_names(leaves)
            .iter()
            .map(|g| medoid(g, leaves, scores))
            .collect::<Result<_, _>>()?;
        Ok(self)
    }

    /// CSV `group,workload,is_medoid`.
    pub fn write_csv<W: Write>(&self, leaves: &[String], mut w: W) -> Result<(), ClusterError> {
        let mut s = String::from("group,workload,is_medoid\n");
        for (g, members) in self.group_names(leaves).iter().enumerate() {
            for m in members {
                let is_medoid = self.medoids.get(g) == Some(m);
                let _ = writeln!(s, "{},{},{}", g + 1, m, is_medoid);
            }
        }
        w.write_all(s.as_bytes()).map_err(|e| ClusterError::Export(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn two_leaves_merge_at_their_distance() {
        let pts = Matrix::from_rows(&[[0.0_f64, 0.0], [3.0, 4.0]]);
        for linkage in Linkage::ALL {
            let d = build_dendrogram(&pts, &labels(2), linkage).unwrap();
            assert_eq!(d.merges(), &[Merge { left: 0, right: 1, height: 5.0, size: 2 }]);
        }
    }

    #[test]
    fn collinear_single_linkage() {
        let pts = Matrix::from_rows(&[[0.0_f64], [1.0], [10.0]]);
        let d = build_dendrogram(&pts, &labels(3), Linkage::Single).unwrap();
        assert_eq!(d.merges()[0], Merge { left: 0, right: 1, height: 1.0, size: 2 });
        assert_eq!(d.merges()[1], Merge { left: 2, right: 3, height: 9.0, size: 3 });
        assert_eq!(d.cut(5.0).groups, vec![vec![0, 1], vec![2]]);
        assert_eq!(d.cut(0.0).groups.len(), 3);
        assert_eq!(d.cut(9.5).groups, vec![vec![0, 1, 2]]);
        // merges exactly at the threshold are not applied
        assert_eq!(d.cut(9.0).groups.len(), 2);
    }

    #[test]
    fn cut_to_group_count() {
        let pts = Matrix::from_rows(&[[0.0_f64], [1.0], [10.0], [11.0]]);
        let d = build_dendrogram(&pts, &labels(4), Linkage::Ward).unwrap();
        assert_eq!(d.cut_groups(2).unwrap().groups, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(d.cut_groups(4).unwrap().groups.len(), 4);
        assert!(d.cut_groups(0).is_err());
        assert!(d.cut_groups(5).is_err());
    }

    #[test]
    fn too_few_rows() {
        let pts = Matrix::from_rows(&[[0.0_f64]]);
        assert_eq!(build_dendrogram(&pts, &labels(1), Linkage::Ward).unwrap_err(), ClusterError::TooFewRows(1));
    }

    #[test]
    fn medoid_of_collinear_points() {
        let pts = Matrix::from_rows(&[[0.0_f64], [1.0], [10.0]]);
        let names = labels(3);
        assert_eq!(medoid(&names, &names, &pts).unwrap(), "w1");
        assert_eq!(medoid(&names[2..], &names, &pts).unwrap(), "w2");
        assert_eq!(
            medoid(&["nope".to_string()], &names, &pts).unwrap_err(),
            ClusterError::UnknownWorkload("nope".into())
        );
        assert_eq!(medoid::<f64>(&[], &names, &pts).unwrap_err(), ClusterError::EmptyGroup);
    }

    #[test]
    fn medoid_ties_go_lexicographic() {
        let pts = Matrix::from_rows(&[[0.0_f64], [2.0]]);
        let names = vec!["b".to_string(), "a".to_string()];
        assert_eq!(medoid(&names, &names, &pts).unwrap(), "a");
    }

    #[test]
    fn linkage_parses() {
        assert_eq!("Ward".parse::<Linkage>().unwrap(), Linkage::Ward);
        assert!("centroid".parse::<Linkage>().is_err());
    }

    #[test]
    fn svg_is_deterministic_and_labelled() {
        let pts = Matrix::from_rows(&[[0.0_f64], [1.0], [10.0]]);
        let d = build_dendrogram(&pts, &labels(3), Linkage::Average).unwrap();
        let a = d.to_svg("t", Some(5.0));
        assert_eq!(a, d.to_svg("t", Some(5.0)));
        assert!(a.contains(">w2</text>"));
        assert_eq!(d.leaf_order(), vec![2, 0, 1]);
    }
}
