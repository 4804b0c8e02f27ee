//! Truncated Fock-space linear algebra.
//!
//! Operators and states carry the list of mode dimensions they act on. The
//! two-mode convention used everywhere in the crate is *cavity first, KNR
//! second*: for `HilbertDims { n_a, n_b }` the composite index of
//! `|i⟩_a ⊗ |j⟩_b` is `i * n_b + j`. Effective models replace the KNR mode
//! with a two-level cat qubit and keep the same ordering.

mod expm;
pub(crate) mod linalg;
mod operator;
pub(crate) mod sparse;
pub(crate) mod state;

pub use expm::expm_array;
pub use operator::QOperator;
pub use state::{QState, StateKind};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Fock truncations of the cavity (`n_a`) and the KNR (`n_b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertDims {
    pub n_a: usize,
    pub n_b: usize,
}

impl HilbertDims {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        for dim in [n_a, n_b] {
            if dim < 2 {
                return Err(Error::InvalidDimension { dim, min: 2 });
            }
        }
        Ok(Self { n_a, n_b })
    }

    pub fn modes(&self) -> [usize; 2] {
        [self.n_a, self.n_b]
    }

    pub fn total(&self) -> usize {
        self.n_a * self.n_b
    }
}

/// Smallest truncation accepted for a coherent amplitude of modulus `r`.
///
/// The Poisson tail beyond `|β|² + 5|β|` is below 1e-8 for the amplitudes
/// used here; ten extra levels cover small amplitudes.
pub fn required_levels(r: f64) -> usize {
    (r * r + 5.0 * r + 10.0).ceil() as usize
}

pub(crate) fn check_truncation(amplitude: C64, dim: usize) -> Result<()> {
    let r = amplitude.norm();
    let required = required_levels(r);
    if dim < required {
        return Err(Error::TruncationTooSmall { amplitude: r, dim, required });
    }
    Ok(())
}

/// Annihilation operator with `⟨n-1|a|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<QOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let mut op = QOperator::zeros(&[dim]);
    for n in 1..dim {
        op.matrix_mut()[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(op)
}

pub fn creation(dim: usize) -> Result<QOperator> {
    Ok(annihilation(dim)?.dagger())
}

pub fn number(dim: usize) -> Result<QOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let diag: Vec<C64> = (0..dim).map(|n| C64::new(n as f64, 0.0)).collect();
    Ok(QOperator::diagonal(&[dim], &diag))
}

/// `Kronecker product`, with `op_a` as the left (slow-index) factor.
pub fn tensor(op_a: &QOperator, op_b: &QOperator) -> QOperator {
    op_a.tensor(op_b)
}

/// Coherent state `|β⟩`, renormalized after truncation.
pub fn coherent_state(beta: C64, dim: usize) -> Result<QState> {
    check_truncation(beta, dim)?;
    let mut amp = Vec::with_capacity(dim);
    let mut term = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    amp.push(term);
    for n in 1..dim {
        term = term * beta / (n as f64).sqrt();
        amp.push(term);
    }
    QState::normalized_ket(&[dim], amp.into())
}

/// `D(α) = exp(α a† − α* a)` on a truncated mode.
pub fn displacement_operator(alpha: C64, dim: usize) -> Result<QOperator> {
    check_truncation(alpha, dim)?;
    let a = annihilation(dim)?;
    let generator = &(&a.dagger() * alpha) - &(&a * alpha.conj());
    generator.expm(ONE)
}

/// `exp(scale · op)`.
pub fn expm(op: &QOperator, scale: C64) -> Result<QOperator> {
    op.expm(scale)
}
