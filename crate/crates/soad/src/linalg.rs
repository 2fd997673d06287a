//! Conversions between ndarray containers and nalgebra dense types, plus the
//! few factorizations the library needs at desk scale.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SoadError};

pub(crate) fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_na_vec(a: ArrayView1<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().copied())
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub(crate) fn from_na_vec(v: &DVector<f64>) -> Array1<f64> {
    Array1::from_iter(v.iter().copied())
}

/// Solve `S x = b` for symmetric positive-definite `S` via Cholesky.
pub(crate) fn solve_spd(s: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| SoadError::Numerical("singular innovation covariance".into()))?;
    Ok(chol.solve(b))
}

/// Eigendecomposition of a symmetric matrix: returns (eigenvectors, eigenvalues)
/// with `a = V diag(lambda) V^T`.
pub(crate) fn sym_eigen(a: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let se = nalgebra::SymmetricEigen::new(to_na(a));
    (from_na(&se.eigenvectors), from_na_vec(&se.eigenvalues))
}
