//! One-sided Jacobi (Hestenes) singular value decomposition.

use crate::matrix::{dot, Matrix};
use crate::Scalar;

const MAX_SWEEPS: usize = 80;

/// Singular values (descending) and matching right singular vectors.
#[derive(Debug, Clone)]
pub struct RightSvd<T> {
    pub singular_values: Vec<T>,
    /// `r x d`, one unit vector per row, `r = min(rows, cols)`.
    pub right_vectors: Matrix<T>,
}

/// Orthogonalizes the columns of `cols` (each of length `m`) in place by plane
/// rotations and returns the accumulated rotation as columns of a `p x p`
/// matrix.
fn hestenes<T: Scalar>(cols: &mut [Vec<T>]) -> Vec<Vec<T>> {
    let p = cols.len();
    let mut v: Vec<Vec<T>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(cols, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], i: usize, j: usize, c: T, s: T) {
    let (head, tail) = cols.split_at_mut(j);
    let (a, b) = (&mut head[i], &mut tail[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Extends `basis` with unit vectors orthogonal to everything in it, trying
/// coordinate axes in index order.
fn complete_basis<T: Scalar>(basis: &mut Vec<Vec<T>>, d: usize, needed: usize) {
    let mut axis = 0;
    while basis.len() < needed && axis < d {
        let mut v = vec![T::zero(); d];
        v[axis] = T::one();
        axis += 1;
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = dot(&v, b);
                for (x, &y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > T::of(0.1) {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
}

/// Thin SVD of an `n x d` matrix, keeping only the right singular vectors.
///
/// Vectors whose singular value is numerically zero are replaced with an
/// orthonormal completion, so the rows of `right_vectors` are always
/// orthonormal.
pub fn right_svd<T: Scalar>(a: &Matrix<T>) -> RightSvd<T> {
    let (n, d) = (a.rows(), a.cols());
    let r = n.min(d);
    let tall = n >= d;
    // Columns being orthogonalized: those of A when tall, of A^T otherwise.
    let mut cols: Vec<Vec<T>> = if tall {
        (0..d).map(|c| a.col(c)).collect()
    } else {
        (0..n).map(|i| a.row(i).to_vec()).collect()
    };
    let rot = hestenes(&mut cols);
    let norms: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("finite").then(x.cmp(&y)));
    let largest = order.first().map_or(T::zero(), |&i| norms[i]);
    let cutoff = largest * T::epsilon() * T::of_usize(n.max(d)) * T::of(4.0);

    let mut singular_values = Vec::with_capacity(r);
    let mut vectors: Vec<Vec<T>> = Vec::with_capacity(r);
    for &i in &order {
        let sigma = norms[i];
        if !(sigma > cutoff) {
            break;
        }
        let v = if tall {
            // A V = W  =>  right vectors are the columns of V
            (0..d).map(|k| rot[i][k]).collect()
        } else {
            // A^T V = W = U S  =>  A = V S U^T, right vectors are W / sigma
            cols[i].iter().map(|&x| x / sigma).collect()
        };
        singular_values.push(sigma);
        vectors.push(v);
    }
    complete_basis(&mut vectors, d, r);
    singular_values.resize(r, T::zero());

    let mut right_vectors = Matrix::zeros(r, d);
    for (row, v) in vectors.iter().enumerate() {
        right_vectors.row_mut(row).copy_from_slice(v);
    }
    RightSvd {
        singular_values,
        right_vectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::from_rows(&[[3.0_f64, 0.0], [0.0, -5.0], [0.0, 0.0]]);
        let svd = right_svd(&a);
        assert!((svd.singular_values[0] - 5.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 3.0).abs() < 1e-12);
        assert!((svd.right_vectors.get(0, 1).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_rank_deficient_matrix_gets_completed_basis() {
        let a = Matrix::from_rows(&[[1.0_f64, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0]]);
        let svd = right_svd(&a);
        assert_eq!(svd.singular_values.len(), 2);
        assert_eq!(svd.singular_values[1], 0.0);
        let v = &svd.right_vectors;
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(v.row(i), v.row(j)) - expect).abs() < 1e-12);
            }
        }
    }
}
