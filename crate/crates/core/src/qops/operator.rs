use std::ops::{Add, Mul, Neg, Sub};

use ndarray::{Array1, Array2};

use super::{expm::expm_array, QState, StateKind, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Dense complex operator on a (possibly composite) truncated Fock space.
///
/// The arithmetic operators (`+`, `-`, `*`) panic on a dimension mismatch;
/// the `checked_*` methods return [`Error::DimensionMismatch`] instead.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    dims: Vec<usize>,
    mat: Array2<C64>,
}

impl QOperator {
    pub fn new(dims: &[usize], mat: Array2<C64>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if dims.is_empty() || mat.nrows() != side || mat.ncols() != side {
            return Err(Error::DimensionMismatch { left: dims.to_vec(), right: vec![mat.nrows(), mat.ncols()] });
        }
        Ok(Self { dims: dims.to_vec(), mat })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self { dims: dims.to_vec(), mat: Array2::zeros((side, side)) }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self { dims: dims.to_vec(), mat: Array2::eye(side) }
    }

    pub fn diagonal(dims: &[usize], diag: &[C64]) -> Self {
        let mut op = Self::zeros(dims);
        assert_eq!(diag.len(), op.dim(), "diagonal length does not match dims");
        for (k, &d) in diag.iter().enumerate() {
            op.mat[[k, k]] = d;
        }
        op
    }

    /// `|ψ⟩⟨φ|` for two kets on the same space.
    pub fn outer(ket: &QState, bra: &QState) -> Result<Self> {
        ket.check_dims(bra.dims())?;
        let (Some(u), Some(v)) = (ket.as_ket(), bra.as_ket()) else {
            return Err(Error::InvalidParameter("outer product needs two kets".into()));
        };
        let n = u.len();
        let mut mat = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                mat[[i, j]] = u[i] * v[j].conj();
            }
        }
        Ok(Self { dims: ket.dims().to_vec(), mat })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<C64> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    pub fn dagger(&self) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.t().mapv(|z| z.conj()) }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { left: self.dims.clone(), right: other.dims.clone() });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat + &other.mat })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { dims: self.dims.clone(), mat: &self.mat - &other.mat })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { dims: self.dims.clone(), mat: self.mat.dot(&other.mat) })
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat * factor }
    }

    /// Kronecker product with `self` as the left factor.
    pub fn tensor(&self, other: &Self) -> Self {
        let (n, m) = (self.dim(), other.dim());
        let mut mat = Array2::zeros((n * m, n * m));
        for i in 0..n {
            for j in 0..n {
                let x = self.mat[[i, j]];
                if x == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        mat[[i * m + k, j * m + l]] = x * other.mat[[k, l]];
                    }
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, mat }
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |M - M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_error();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Acts on a ket (`O|ψ⟩`) or a density matrix (`O ρ O†`).
    ///
    /// The result is not renormalized.
    pub fn apply(&self, state: &QState) -> Result<QState> {
        state.check_dims(&self.dims)?;
        match state.kind() {
            StateKind::Ket => {
                let v = self.apply_vec(state.as_ket().unwrap());
                Ok(QState::ket_unchecked(&self.dims, v))
            }
            StateKind::Density => {
                let rho = state.as_density().unwrap();
                let out = self.mat.dot(rho).dot(&self.dagger().mat);
                Ok(QState::density_unchecked(&self.dims, out))
            }
        }
    }

    pub fn apply_vec(&self, v: &Array1<C64>) -> Array1<C64> {
        self.mat.dot(v)
    }

    /// `⟨φ|O|ψ⟩`.
    pub fn matrix_element(&self, bra: &QState, ket: &QState) -> Result<C64> {
        bra.check_dims(&self.dims)?;
        ket.check_dims(&self.dims)?;
        match (bra.as_ket(), ket.as_ket()) {
            (Some(u), Some(v)) => {
                let ov = self.apply_vec(v);
                Ok(u.iter().zip(ov.iter()).map(|(x, y)| x.conj() * y).sum())
            }
            _ => Err(Error::InvalidParameter("matrix elements need kets".into())),
        }
    }

    /// Real eigenvalues in ascending order; fails unless hermitian to 1e-10.
    pub fn eigenvalues_hermitian(&self) -> Result<Vec<f64>> {
        self.ensure_hermitian(1e-10)?;
        Ok(super::linalg::eigvalsh(&self.mat))
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of a hermitian operator.
    pub fn eigh(&self) -> Result<(Vec<f64>, Array2<C64>)> {
        self.ensure_hermitian(1e-10)?;
        Ok(super::linalg::eigh(&self.mat))
    }

    pub fn expm(&self, scale: C64) -> Result<Self> {
        if self.mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !scale.is_finite() {
            return Err(Error::Numeric("expm of a matrix with non-finite entries".into()));
        }
        let scaled = &self.mat * scale;
        Ok(Self { dims: self.dims.clone(), mat: expm_array(&scaled)? })
    }

    /// `V† O V` for an isometry `V` whose columns span the target space.
    pub(crate) fn compress(&self, iso: &Array2<C64>, dims: &[usize]) -> Self {
        let vh = iso.t().mapv(|z| z.conj());
        Self { dims: dims.to_vec(), mat: vh.dot(&self.mat).dot(iso) }
    }
}

impl Add for &QOperator {
    type Output = QOperator;
    fn add(self, rhs: &QOperator) -> QOperator {
        self.checked_add(rhs).expect("operator addition")
    }
}

impl Sub for &QOperator {
    type Output = QOperator;
    fn sub(self, rhs: &QOperator) -> QOperator {
        self.checked_sub(rhs).expect("operator subtraction")
    }
}

impl Mul for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: &QOperator) -> QOperator {
        self.checked_mul(rhs).expect("operator product")
    }
}

impl Mul<C64> for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: C64) -> QOperator {
        self.scaled(rhs)
    }
}

impl Mul<f64> for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: f64) -> QOperator {
        self.scaled(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for QOperator {
    type Output = QOperator;
    fn mul(mut self, rhs: C64) -> QOperator {
        self.mat.mapv_inplace(|z| z * rhs);
        self
    }
}

impl Mul<f64> for QOperator {
    type Output = QOperator;
    fn mul(self, rhs: f64) -> QOperator {
        self * C64::new(rhs, 0.0)
    }
}

impl Neg for &QOperator {
    type Output = QOperator;
    fn neg(self) -> QOperator {
        self.scaled(-ONE)
    }
}
