//! Small dense helpers on row-major `f64` slices.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
#[inline]
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    libm::sqrt(s)
}

#[inline]
pub fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).sum()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass. Vectors whose
/// residual falls below `tol` times their original norm are dropped.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n0 = norm(v);
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let nw = norm(&w);
        if nw > tol * n0 {
            out.push(scale(&w, 1.0 / nw));
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal rows `frame` in `R^n`.
pub fn complement(frame: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let need = n - frame.len();
    // Try standard basis vectors in order of how little the frame covers them.
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let covered: f64 = frame.iter().map(|f| f[i] * f[i]).sum();
            (covered, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut all: Vec<Vec<f64>> = frame.to_vec();
    let mut out = Vec::with_capacity(need);
    for &(_, i) in &order {
        if out.len() == need {
            break;
        }
        let mut w = unit(n, i);
        for _ in 0..2 {
            for q in &all {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let nw = norm(&w);
        if nw > 1e-6 {
            let w = scale(&w, 1.0 / nw);
            all.push(w.clone());
            out.push(w);
        }
    }
    out
}

/// Largest absolute eigenvalue of a symmetric `n x n` row-major matrix.
pub fn sym_spectral_norm(m: &[f64], n: usize) -> f64 {
    let mat = DMatrix::from_row_slice(n, n, m);
    let eig = SymmetricEigen::new(mat);
    eig.eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(libm::fabs(l)))
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues ascending and
/// the matching unit eigenvectors.
pub fn sym_eigen(m: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mat = DMatrix::from_row_slice(n, n, m);
    let eig = SymmetricEigen::new(mat);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// `rows x cols` row-major matrix times vector.
pub fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| dot(&m[r * cols..(r + 1) * cols], x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let f = orthonormalize(&[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]], 1e-12);
        let c = complement(&f, 4);
        assert_eq!(c.len(), 2);
        for a in &c {
            assert!((norm(a) - 1.0).abs() < 1e-12);
            for b in &f {
                assert!(dot(a, b).abs() < 1e-12);
            }
        }
        assert!(dot(&c[0], &c[1]).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_drops_dependent_vectors() {
        let f = orthonormalize(&[vec![1.0, 2.0], vec![2.0, 4.0]], 1e-10);
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = [3.0, 0.0, 0.0, -5.0];
        assert!((sym_spectral_norm(&m, 2) - 5.0).abs() < 1e-12);
    }
}
