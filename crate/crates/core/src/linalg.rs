//! Dense solves for the small systems (Newton steps, covariance, kernel
//! regression) backed by nalgebra.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub(crate) fn to_na(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solves `a x = b` for symmetric positive definite `a`; `None` if the
/// Cholesky factorization fails.
pub(crate) fn solve_spd(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let chol = to_na(a).cholesky()?;
    let x = chol.solve(&DVector::from_iterator(b.len(), b.iter().copied()));
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

pub(crate) fn inverse_spd(a: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    let inv = to_na(a).cholesky()?.inverse();
    inv.iter().all(|v| v.is_finite()).then(|| from_na(&inv))
}

/// Minimum-norm least-squares solution through the SVD, for rank-deficient
/// systems.
pub(crate) fn solve_min_norm(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let m = to_na(a);
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let svd = m.svd(true, true);
    let x = svd
        .solve(&DVector::from_iterator(b.len(), b.iter().copied()), scale * 1e-12)
        .ok()?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// General square solve via LU with partial pivoting, rejecting
/// near-singular pivots relative to the matrix scale.
pub(crate) fn solve_lu(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let m = to_na(a);
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= scale * 1e-12 {
        return None;
    }
    let x = lu.solve(&DVector::from_iterator(b.len(), b.iter().copied()))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}
