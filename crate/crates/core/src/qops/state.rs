use ndarray::{Array1, Array2};

use super::{QOperator, C64, ZERO};
use crate::error::{Error, Result};

const KET_NORM_TOL: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Ket,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    Ket(Array1<C64>),
    Density(Array2<C64>),
}

/// A pure ket or a density matrix with explicit mode dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    dims: Vec<usize>,
    data: Data,
}

impl QState {
    /// Validated ket; the norm must be 1 within 1e-8.
    pub fn ket(dims: &[usize], v: Array1<C64>) -> Result<Self> {
        check_len(dims, v.len())?;
        let norm = l2(&v);
        if (norm - 1.0).abs() > KET_NORM_TOL {
            return Err(Error::NotNormalized { deviation: (norm - 1.0).abs() });
        }
        Ok(Self { dims: dims.to_vec(), data: Data::Ket(v) })
    }

    pub fn normalized_ket(dims: &[usize], v: Array1<C64>) -> Result<Self> {
        check_len(dims, v.len())?;
        let norm = l2(&v);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numeric("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self { dims: dims.to_vec(), data: Data::Ket(v / C64::new(norm, 0.0)) })
    }

    /// Validated density matrix: unit trace within 1e-8, hermitian within 1e-10.
    pub fn density(dims: &[usize], rho: Array2<C64>) -> Result<Self> {
        check_len(dims, rho.nrows())?;
        check_len(dims, rho.ncols())?;
        let state = Self { dims: dims.to_vec(), data: Data::Density(rho) };
        let tr = state.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized { deviation: (tr - 1.0).abs() });
        }
        let herm = state.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        Ok(state)
    }

    pub(crate) fn ket_unchecked(dims: &[usize], v: Array1<C64>) -> Self {
        Self { dims: dims.to_vec(), data: Data::Ket(v) }
    }

    pub(crate) fn density_unchecked(dims: &[usize], rho: Array2<C64>) -> Self {
        Self { dims: dims.to_vec(), data: Data::Density(rho) }
    }

    /// Computational basis ket `|index⟩` of the composite space.
    pub fn basis(dims: &[usize], index: usize) -> Result<Self> {
        let n: usize = dims.iter().product();
        if index >= n {
            return Err(Error::OutOfRange { index, dim: n });
        }
        let mut v = Array1::zeros(n);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self::ket_unchecked(dims, v))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn kind(&self) -> StateKind {
        match self.data {
            Data::Ket(_) => StateKind::Ket,
            Data::Density(_) => StateKind::Density,
        }
    }

    pub fn as_ket(&self) -> Option<&Array1<C64>> {
        match &self.data {
            Data::Ket(v) => Some(v),
            Data::Density(_) => None,
        }
    }

    pub fn as_density(&self) -> Option<&Array2<C64>> {
        match &self.data {
            Data::Density(m) => Some(m),
            Data::Ket(_) => None,
        }
    }

    pub fn to_density(&self) -> QState {
        match &self.data {
            Data::Density(_) => self.clone(),
            Data::Ket(v) => {
                let n = v.len();
                let rho = Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj());
                Self::density_unchecked(&self.dims, rho)
            }
        }
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimensionMismatch { left: self.dims.clone(), right: dims.to_vec() });
        }
        Ok(())
    }

    /// Vector 2-norm for kets, trace for density matrices.
    pub fn norm(&self) -> f64 {
        match &self.data {
            Data::Ket(v) => l2(v),
            Data::Density(_) => self.trace(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            Data::Ket(v) => v.iter().map(|z| z.norm_sqr()).sum(),
            Data::Density(m) => m.diag().iter().map(|z| z.re).sum(),
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        match &self.data {
            Data::Ket(_) => 0.0,
            Data::Density(m) => {
                let n = m.nrows();
                let mut worst = 0.0f64;
                for i in 0..n {
                    for j in i..n {
                        worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
                    }
                }
                worst
            }
        }
    }

    /// `⟨self|other⟩` between two kets.
    pub fn overlap(&self, other: &QState) -> Result<C64> {
        self.check_dims(&other.dims)?;
        match (&self.data, &other.data) {
            (Data::Ket(u), Data::Ket(v)) => Ok(inner(u, v)),
            _ => Err(Error::InvalidParameter("overlap needs two kets".into())),
        }
    }

    /// Population of the pure state `target`: `|⟨t|ψ⟩|²` or `⟨t|ρ|t⟩`.
    pub fn population(&self, target: &QState) -> Result<f64> {
        self.check_dims(&target.dims)?;
        let t = target.as_ket().ok_or_else(|| Error::InvalidParameter("population target must be a ket".into()))?;
        Ok(match &self.data {
            Data::Ket(v) => inner(t, v).norm_sqr(),
            Data::Density(m) => inner(t, &m.dot(t)).re,
        })
    }

    pub fn expect(&self, op: &QOperator) -> Result<C64> {
        self.check_dims(op.dims())?;
        Ok(match &self.data {
            Data::Ket(v) => inner(v, &op.apply_vec(v)),
            Data::Density(m) => op.matrix().dot(m).diag().sum(),
        })
    }

    pub fn tensor(&self, other: &QState) -> QState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        match (&self.data, &other.data) {
            (Data::Ket(u), Data::Ket(v)) => {
                let m = v.len();
                let w = Array1::from_shape_fn(u.len() * m, |k| u[k / m] * v[k % m]);
                Self::ket_unchecked(&dims, w)
            }
            _ => {
                let a = self.to_density();
                let b = other.to_density();
                let (ra, rb) = (a.as_density().unwrap(), b.as_density().unwrap());
                let op = QOperator::new(&self.dims, ra.clone())
                    .unwrap()
                    .tensor(&QOperator::new(&other.dims, rb.clone()).unwrap());
                Self::density_unchecked(&dims, op.into_matrix())
            }
        }
    }

    /// Reduced density matrix of the last mode(s), tracing out the first mode.
    pub fn trace_out_first(&self) -> Result<QState> {
        if self.dims.len() < 2 {
            return Err(Error::InvalidParameter("partial trace needs a composite state".into()));
        }
        let first = self.dims[0];
        let rest: Vec<usize> = self.dims[1..].to_vec();
        let m: usize = rest.iter().product();
        let mut out = Array2::<C64>::zeros((m, m));
        match &self.data {
            Data::Ket(v) => {
                for k in 0..first {
                    for i in 0..m {
                        let vi = v[k * m + i];
                        if vi == ZERO {
                            continue;
                        }
                        for j in 0..m {
                            out[[i, j]] += vi * v[k * m + j].conj();
                        }
                    }
                }
            }
            Data::Density(rho) => {
                for k in 0..first {
                    for i in 0..m {
                        for j in 0..m {
                            out[[i, j]] += rho[[k * m + i, k * m + j]];
                        }
                    }
                }
            }
        }
        Ok(Self::density_unchecked(&rest, out))
    }

    /// Probability distribution over the levels of the first mode.
    pub fn first_mode_distribution(&self) -> Vec<f64> {
        let first = self.dims[0];
        let m = self.dim() / first;
        (0..first)
            .map(|k| match &self.data {
                Data::Ket(v) => (0..m).map(|j| v[k * m + j].norm_sqr()).sum(),
                Data::Density(rho) => (0..m).map(|j| rho[[k * m + j, k * m + j]].re).sum(),
            })
            .collect()
    }
}

fn check_len(dims: &[usize], len: usize) -> Result<()> {
    let n: usize = dims.iter().product();
    if dims.is_empty() || n != len {
        return Err(Error::DimensionMismatch { left: dims.to_vec(), right: vec![len] });
    }
    Ok(())
}

fn l2(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(u: &Array1<C64>, v: &Array1<C64>) -> C64 {
    u.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum()
}
