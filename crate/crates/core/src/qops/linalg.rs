//! Dense decompositions backed by nalgebra.

use nalgebra::DMatrix;
use ndarray::Array2;

use super::C64;

fn to_na(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenvalues of a hermitian matrix, ascending.
pub fn eigvalsh(a: &Array2<C64>) -> Vec<f64> {
    let mut vals: Vec<f64> = to_na(a).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of a hermitian matrix, eigenvalues ascending with
/// matching eigenvector columns.
pub fn eigh(a: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let eig = to_na(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = a.nrows();
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Solves `A X = B`; `None` when `A` is singular.
pub fn solve(a: &Array2<C64>, b: &Array2<C64>) -> Option<Array2<C64>> {
    to_na(a).lu().solve(&to_na(b)).map(|x| from_na(&x))
}

/// True when `A + shift·1` admits a Cholesky factorization, i.e. every
/// eigenvalue of the hermitian matrix `A` exceeds `-shift`.
pub fn is_positive_with_shift(a: &Array2<C64>, shift: f64) -> bool {
    let mut m = to_na(a);
    for k in 0..m.nrows() {
        m[(k, k)] += shift;
    }
    m.cholesky().is_some()
}
