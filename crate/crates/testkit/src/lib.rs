//! Slow, direct reference implementations for checking the optimized code,
//! plus seeded generators for test data. Everything works on plain vectors
//! so that no code is shared with the crate under test.

use nalgebra::{DMatrix, SymmetricEigen};
pub use rand::rngs::StdRng;
pub use rand::Rng;
use rand::SeedableRng;

pub type Rows = Vec<Vec<f64>>;

/// Published per-workload rows: suite, workload, instruction count (billions),
/// loads %, stores %, branches %, IPC.
#[allow(clippy::approx_constant)]
pub const TABLE1: &[(&str, &str, f64, f64, f64, f64, f64)] = &[
    ("int_rate", "706.stockfish_r", 6507.0, 22.0, 9.9, 10.4, 3.625),
    ("int_rate", "707.ntest_r", 2507.0, 25.0, 9.6, 9.2, 3.268),
    ("int_rate", "708.sqlite_r", 1716.0, 26.9, 11.9, 20.9, 2.228),
    ("int_rate", "710.omnetpp_r", 1583.0, 31.9, 17.5, 20.5, 2.103),
    ("int_rate", "714.cpython_r", 1475.0, 27.9, 15.8, 21.4, 2.843),
    ("int_rate", "721.gcc_r", 1503.0, 28.0, 11.3, 21.8, 0.551),
    ("int_rate", "723.llvm_r", 1534.0, 26.0, 13.7, 20.8, 1.484),
    ("int_rate", "727.cppcheck_r", 1286.0, 22.5, 9.6, 26.7, 2.228),
    ("int_rate", "729.abc_r", 1400.0, 26.2, 8.9, 16.7, 2.187),
    ("int_rate", "734.vpr_r", 1367.0, 30.9, 11.2, 19.2, 2.097),
    ("int_rate", "735.gem5_r", 1659.0, 30.2, 14.7, 20.9, 2.068),
    ("int_rate", "750.sealcrypto_r", 3087.0, 12.0, 4.7, 1.9, 4.961),
    ("int_rate", "753.ns3_r", 1432.0, 29.4, 16.8, 22.2, 2.230),
    ("int_rate", "777.zstd_r", 1817.0, 22.2, 9.0, 13.3, 1.911),
    ("int_speed", "801.xz_s", 17757.0, 22.2, 7.4, 14.4, 1.008),
    ("int_speed", "807.ntest_s", 151005.0, 20.8, 7.8, 6.7, 3.460),
    ("int_speed", "817.flac_s", 90970.0, 17.6, 2.3, 4.4, 4.156),
    ("int_speed", "821.gcc_s", 109486.0, 26.8, 12.5, 21.7, 2.016),
    ("int_speed", "823.llvm_s", 103105.0, 22.0, 11.8, 23.1, 1.896),
    ("int_speed", "827.cppcheck_s", 90423.0, 23.0, 11.2, 26.5, 2.375),
    ("int_speed", "829.abc_s", 1433.0, 25.1, 11.7, 18.1, 0.858),
    ("int_speed", "834.vpr_s", 3117.0, 30.7, 11.1, 19.4, 1.863),
    ("int_speed", "835.gem5_s", 2858.0, 29.4, 13.5, 17.6, 1.805),
    ("int_speed", "838.diamond_s", 146966.0, 20.1, 6.8, 5.5, 3.203),
    ("int_speed", "846.minizinc_s", 5062.0, 26.5, 18.2, 15.9, 1.228),
    ("int_speed", "853.ns3_s", 11053.0, 28.9, 14.3, 21.0, 1.662),
    ("int_speed", "854.graph500_s", 37168.0, 36.2, 0.9, 25.7, 1.539),
    ("fp_rate", "709.cactus_r", 1456.0, 51.9, 7.9, 1.1, 1.696),
    ("fp_rate", "722.palm_r", 3272.0, 39.0, 9.1, 5.0, 3.187),
    ("fp_rate", "731.astcenc_r", 2615.0, 28.3, 6.5, 8.7, 2.718),
    ("fp_rate", "736.ocio_r", 2484.0, 24.2, 7.5, 9.8, 3.269),
    ("fp_rate", "737.gmsh_r", 1086.0, 29.2, 12.1, 17.2, 1.585),
    ("fp_rate", "748.flightdm_r", 1721.0, 29.5, 14.2, 18.8, 3.071),
    ("fp_rate", "749.fotonik3d_r", 1291.0, 36.8, 13.7, 1.8, 0.785),
    ("fp_rate", "765.roms_r", 2738.0, 34.8, 8.4, 7.3, 1.830),
    ("fp_rate", "766.femflow_r", 5012.0, 34.9, 20.1, 6.9, 3.265),
    ("fp_rate", "767.nest_r", 1848.0, 33.5, 12.3, 14.0, 2.844),
    ("fp_rate", "772.marian_r", 6389.0, 8.7, 1.3, 3.0, 3.953),
    ("fp_rate", "782.lbm_r", 2236.0, 21.2, 10.9, 0.7, 1.241),
    ("fp_speed", "800.pot3d_s", 7603.0, 34.8, 8.1, 9.5, 0.754),
    ("fp_speed", "803.sph_exa_s", 64626.0, 24.8, 3.4, 11.2, 2.465),
    ("fp_speed", "809.cactus_s", 29190.0, 51.9, 8.1, 1.6, 1.338),
    ("fp_speed", "811.tealeaf_s", 40570.0, 20.2, 4.9, 8.8, 1.617),
    ("fp_speed", "816.nab_s", 67717.0, 31.2, 5.7, 11.9, 2.441),
    ("fp_speed", "820.cloverleaf_s", 25781.0, 33.2, 4.7, 5.9, 1.349),
    ("fp_speed", "822.palm_s", 48883.0, 38.2, 8.9, 6.4, 1.920),
    ("fp_speed", "849.fotonik3d_s", 17777.0, 56.0, 9.8, 2.7, 0.955),
    ("fp_speed", "857.namd_s", 168881.0, 26.4, 6.6, 2.2, 3.929),
    ("fp_speed", "865.roms_s", 28484.0, 34.7, 8.6, 7.9, 1.574),
    ("fp_speed", "867.nest_s", 66774.0, 30.1, 9.3, 14.7, 1.790),
    ("fp_speed", "872.marian_s", 65980.0, 10.8, 2.8, 3.8, 3.258),
    ("fp_speed", "881.neutron_s", 33545.0, 25.8, 11.3, 9.1, 1.204),
];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut StdRng, n: usize, d: usize) -> Rows {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

pub fn random_positive(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.05..50.0)).collect()
}

/// Eigenvalues of the sample covariance (divisor `n - 1`), descending.
pub fn covariance_eigenvalues(rows: &Rows) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - means[j]);
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Single,
    Complete,
    Average,
    Ward,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn centroid(rows: &Rows, members: &[usize]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d)
        .map(|j| members.iter().map(|&i| rows[i][j]).sum::<f64>() / members.len() as f64)
        .collect()
}

/// Distance between two clusters computed from their points.
pub fn cluster_distance(rows: &Rows, a: &[usize], b: &[usize], link: Link) -> f64 {
    let pairs = || a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j)));
    match link {
        Link::Single => pairs().map(|(i, j)| dist(&rows[i], &rows[j])).fold(f64::INFINITY, f64::min),
        Link::Complete => pairs().map(|(i, j)| dist(&rows[i], &rows[j])).fold(0.0, f64::max),
        Link::Average => pairs().map(|(i, j)| dist(&rows[i], &rows[j])).sum::<f64>() / (a.len() * b.len()) as f64,
        Link::Ward => {
            let (na, nb) = (a.len() as f64, b.len() as f64);
            (2.0 * na * nb / (na + nb)).sqrt() * dist(&centroid(rows, a), &centroid(rows, b))
        }
    }
}

/// One merge of the naive agglomeration: the two member sets (sorted) and the height.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveMerge {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub height: f64,
}

/// Agglomerative clustering that recomputes every cluster distance from the
/// points at every step. Ties go to the pair with the smaller (min leaf, other min leaf).
pub fn naive_agglomerate(rows: &Rows, link: Link) -> Vec<NaiveMerge> {
    let mut clusters: Vec<Vec<usize>> = (0..rows.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = cluster_distance(rows, &clusters[i], &clusters[j], link);
                let (x, y) = (clusters[i][0], clusters[j][0]);
                let key = (x.min(y), x.max(y));
                if best.as_ref().is_none_or(|(bd, bk, _, _)| d < *bd || (d == *bd && key < *bk)) {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (height, _, i, j) = best.unwrap();
        let b = clusters.remove(j);
        let a = std::mem::take(&mut clusters[i]);
        let mut merged = [a.clone(), b.clone()].concat();
        merged.sort_unstable();
        clusters[i] = merged;
        let (a, b) = if a[0] < b[0] { (a, b) } else { (b, a) };
        out.push(NaiveMerge { a, b, height });
    }
    out
}

/// Medoid by brute force: smallest mean distance, ties to the smaller name.
pub fn naive_medoid(rows: &Rows, names: &[String], members: &[usize]) -> String {
    let mut cands: Vec<(f64, &String)> = members
        .iter()
        .map(|&i| {
            let others: Vec<usize> = members.iter().copied().filter(|&j| j != i).collect();
            let mean = if others.is_empty() {
                0.0
            } else {
                others.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>() / others.len() as f64
            };
            (mean, &names[i])
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    cands[0].1.clone()
}

/// Plain geometric mean.
pub fn gm(values: &[f64]) -> f64 {
    values.iter().product::<f64>().powf(1.0 / values.len() as f64)
}

/// Subset accuracy against the suite: `1 - |GM(subset) - GM(suite)| / GM(suite)`.
pub fn subset_accuracy(scores: &[f64], subset: &[usize]) -> f64 {
    let full = gm(scores);
    let part: Vec<f64> = subset.iter().map(|&i| scores[i]).collect();
    1.0 - (gm(&part) - full).abs() / full
}

/// Every k-subset of `0..n`, generated recursively (include/exclude).
pub fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best k-subset by geometric mean of per-machine accuracies
/// (`scores[machine][workload]`). Returns the best value.
pub fn best_subset_accuracy(scores: &[Vec<f64>], k: usize) -> f64 {
    let n = scores[0].len();
    all_subsets(n, k)
        .iter()
        .map(|s| {
            let acc: Vec<f64> = scores.iter().map(|m| subset_accuracy(m, s)).collect();
            if acc.iter().all(|a| *a > 0.0) {
                gm(&acc)
            } else {
                0.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Points around `g` well separated centres: returns rows and the planted label of each.
/// Centre spacing is at least `separation` times the intra-cluster spread.
pub fn planted_clusters(rng: &mut StdRng, sizes: &[usize], dim: usize, separation: f64) -> (Rows, Vec<usize>) {
    let spread = 1.0;
    let mut centres: Vec<Vec<f64>> = Vec::new();
    while centres.len() < sizes.len() {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0) * separation * sizes.len() as f64).collect();
        if centres.iter().all(|o| dist(o, &c) >= 4.0 * separation * spread) {
            centres.push(c);
        }
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (g, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            rows.push(centres[g].iter().map(|x| x + rng.random_range(-spread..spread)).collect());
            labels.push(g);
        }
    }
    (rows, labels)
}

/// Weighted L2 between two metric profiles with per-metric scales; `None`
/// entries on either side are skipped.
pub fn weighted_distance(a: &[Option<f64>], b: &[Option<f64>], w: &[f64], scale: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w.iter().zip(scale))
        .filter_map(|((x, y), (w, s))| Some(w * ((x.as_ref()? - y.as_ref()?) / s).powi(2)))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_complete() {
        assert_eq!(all_subsets(5, 2).len(), 10);
        assert_eq!(all_subsets(4, 4), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn hand_case() {
        assert!((subset_accuracy(&[2.0, 8.0], &[0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ward_of_singletons_is_distance() {
        let rows = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        assert!((cluster_distance(&rows, &[0], &[1], Link::Ward) - 5.0).abs() < 1e-12);
    }
}
