//! Order statistics and geometric means.

use crate::Scalar;

/// Geometric mean over the strictly positive entries of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveGeomean<T> {
    /// `None` when no entry is strictly positive.
    pub value: Option<T>,
    pub used: usize,
    /// Entries `<= 0` left out of the mean.
    pub excluded: usize,
}

/// Geometric mean of the values; every value must be strictly positive.
///
/// The result is clamped into `[min, max]` of the sample so that rounding in
/// `exp(mean(ln x))` cannot push it outside the range it must lie in.
pub fn geomean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() || values.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return None;
    }
    let n = T::of_usize(values.len());
    let log_sum: T = values.iter().map(|v| v.ln()).sum();
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Some((log_sum / n).exp().max(lo).min(hi))
}

pub fn geomean_positive<T: Scalar>(values: &[T]) -> PositiveGeomean<T> {
    let positive: Vec<T> = values.iter().copied().filter(|v| *v > T::zero()).collect();
    PositiveGeomean {
        value: geomean(&positive),
        used: positive.len(),
        excluded: values.len() - positive.len(),
    }
}

pub fn arithmetic_mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum: T = values.iter().copied().sum();
    Some(sum / T::of_usize(values.len()))
}

/// Quantile of an ascending sample, linear interpolation between the two
/// closest ranks (position `(n - 1) * p`).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let pos = T::of_usize(n - 1) * p.max(T::zero()).min(T::one());
    let lo = pos.floor();
    let lo_i = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_i = (lo_i + 1).min(n - 1);
    let frac = pos - lo;
    if frac == T::zero() || lo_i == hi_i {
        sorted[lo_i]
    } else {
        sorted[lo_i] + (sorted[hi_i] - sorted[lo_i]) * frac
    }
}

/// Five-number summary; whiskers are the sample extremes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats<T> {
    pub min: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub max: T,
}

pub fn box_stats<T: Scalar>(values: &[T]) -> Option<BoxStats<T>> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    Some(BoxStats {
        min: sorted[0],
        q1: quantile_sorted(&sorted, T::of(0.25)),
        median: quantile_sorted(&sorted, T::of(0.5)),
        q3: quantile_sorted(&sorted, T::of(0.75)),
        max: sorted[sorted.len() - 1],
    })
}

/// Population mean and standard deviation (n denominator).
pub fn mean_and_pop_stdev<T: Scalar>(values: &[T]) -> Option<(T, T)> {
    let mean = arithmetic_mean(values)?;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::of_usize(values.len());
    Some((mean, var.sqrt()))
}
