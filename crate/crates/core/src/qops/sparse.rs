//! Compressed-row operators for the derivative callbacks of the propagators.
//!
//! Fock-space Hamiltonians have a handful of non-zeros per row, so products
//! with kets and (row-major) density matrices are far cheaper in CSR form.

use ndarray::Array2;

use super::{C64, ZERO};

#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
    diagonal: bool,
}

impl Csr {
    /// Keeps entries with modulus above `drop_below`.
    pub fn from_dense(mat: &Array2<C64>, drop_below: f64) -> Self {
        let n = mat.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut diagonal = true;
        indptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let z = mat[[i, j]];
                if z.norm() > drop_below {
                    indices.push(j);
                    values.push(z);
                    diagonal &= i == j;
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values, diagonal }
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Diagonal entries (zero where absent).
    pub fn diag(&self) -> Vec<C64> {
        let mut d = vec![ZERO; self.n];
        for (i, slot) in d.iter_mut().enumerate() {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[k] == i {
                    *slot = self.values[k];
                }
            }
        }
        d
    }

    /// `out = scale · A x`.
    pub fn matvec(&self, x: &[C64], scale: C64, out: &mut [C64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *slot = scale * acc;
        }
    }

    /// `out = A X` for a row-major square matrix `X` of side `n`.
    pub fn matmat(&self, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            row.fill(ZERO);
            for k in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[k];
                let src = &x[self.indices[k] * n..(self.indices[k] + 1) * n];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[[i, self.indices[k]]] = self.values[k];
            }
        }
        m
    }
}

/// Writes the conjugate transpose of the row-major `x` into `out`.
pub fn adjoint_into(n: usize, x: &[C64], out: &mut [C64]) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    out[j * n + i] = x[i * n + j].conj();
                }
            }
        }
    }
}
