//! Galerkin compression of the KNR mode onto its highest eigenstates.
//!
//! With `E_gap ≫ λ, Δ, κ` the KNR never leaves its top few levels (the cat
//! pair and the first excited states), so `I_a ⊗ V` with `V` holding the
//! top `M` eigenvectors of the single-mode KNR Hamiltonian spans the relevant
//! dynamics. Operators are compressed as `W†OW`; the compression loss of the
//! initial state is reported.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::models::{knr_hamiltonian, ModelParams};
use crate::qops::{HilbertDims, QOperator, QState, C64};

#[derive(Debug, Clone)]
pub struct ReducedBasis {
    n_a: usize,
    n_b: usize,
    levels: usize,
    /// `n_b × M`, columns ordered from the highest KNR eigenvalue down.
    v: Array2<C64>,
    energies: Vec<f64>,
}

impl ReducedBasis {
    /// Keeps the `levels` highest eigenvectors of `δb†b − K b†²b² + P b†² + P* b²`.
    pub fn from_knr(params: &ModelParams, dims: HilbertDims, levels: usize) -> Result<Self> {
        let HilbertDims { n_a, n_b } = HilbertDims::new(dims.n_a, dims.n_b)?;
        if levels < 2 || levels > n_b {
            return Err(Error::InvalidParameter(format!("reduced KNR basis needs 2 ≤ levels ≤ {n_b}, got {levels}")));
        }
        let hb = knr_hamiltonian(params, n_b)?;
        let (vals, vecs) = hb.eigh()?;
        let keep: Vec<usize> = (0..n_b).rev().take(levels).collect();
        let v = Array2::from_shape_fn((n_b, levels), |(i, k)| vecs[[i, keep[k]]]);
        let energies = keep.iter().map(|&k| vals[k]).collect();
        Ok(Self { n_a, n_b, levels, v, energies })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Retained KNR eigenvalues, highest first.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Dimensions of the compressed space.
    pub fn dims(&self) -> [usize; 2] {
        [self.n_a, self.levels]
    }

    pub fn full_dims(&self) -> [usize; 2] {
        [self.n_a, self.n_b]
    }

    /// `V`, the `n_b × M` block acting on the KNR mode.
    pub fn knr_isometry(&self) -> &Array2<C64> {
        &self.v
    }

    /// `I_a ⊗ V` as a dense isometry.
    pub fn isometry(&self) -> Array2<C64> {
        let (n_b, m) = (self.n_b, self.levels);
        let mut w = Array2::zeros((self.n_a * n_b, self.n_a * m));
        for i in 0..self.n_a {
            w.slice_mut(s![i * n_b..(i + 1) * n_b, i * m..(i + 1) * m]).assign(&self.v);
        }
        w
    }

    /// `W†OW`; hermitian inputs are re-symmetrized against roundoff.
    pub fn compress(&self, op: &QOperator) -> Result<QOperator> {
        if op.dims() != self.full_dims() {
            return Err(Error::DimensionMismatch { left: op.dims().to_vec(), right: self.full_dims().to_vec() });
        }
        let c = op.compress(&self.isometry(), &self.dims());
        if op.is_hermitian(crate::models::HERMITIAN_TOL) {
            let sym = (c.matrix() + &c.matrix().t().mapv(|z| z.conj())) * C64::new(0.5, 0.0);
            return QOperator::new(&self.dims(), sym);
        }
        Ok(c)
    }

    /// `W†ψ` without renormalization, plus the lost weight `1 − ‖W†ψ‖²`.
    pub fn compress_ket(&self, psi: &QState) -> Result<(QState, f64)> {
        psi.check_dims(&self.full_dims())?;
        let v = psi.as_ket().ok_or_else(|| Error::InvalidParameter("compress_ket needs a ket".into()))?;
        let (n_b, m) = (self.n_b, self.levels);
        let vh = self.v.t().mapv(|z| z.conj());
        let mut out = Array1::zeros(self.n_a * m);
        for i in 0..self.n_a {
            let block = v.slice(s![i * n_b..(i + 1) * n_b]);
            out.slice_mut(s![i * m..(i + 1) * m]).assign(&vh.dot(&block));
        }
        let kept = out.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let loss = psi.trace() - kept;
        Ok((QState::ket_unchecked(&self.dims(), out), loss))
    }

    /// `Wψ` back in the full Fock space.
    pub fn lift_ket(&self, psi: &QState) -> Result<QState> {
        psi.check_dims(&self.dims())?;
        let v = psi.as_ket().ok_or_else(|| Error::InvalidParameter("lift_ket needs a ket".into()))?;
        let (n_b, m) = (self.n_b, self.levels);
        let mut out = Array1::zeros(self.n_a * n_b);
        for i in 0..self.n_a {
            let block = v.slice(s![i * m..(i + 1) * m]);
            out.slice_mut(s![i * n_b..(i + 1) * n_b]).assign(&self.v.dot(&block));
        }
        Ok(QState::ket_unchecked(&self.full_dims(), out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catspace::cat_basis;
    use crate::dynamics::{evolve_schrodinger, TimeGrid};
    use crate::models::build_full_hamiltonian;

    #[test]
    fn cats_survive_compression() {
        let p = ModelParams::default();
        let dims = HilbertDims::new(4, 25).unwrap();
        let basis = ReducedBasis::from_knr(&p, dims, 4).unwrap();
        assert!((basis.energies()[0] - 160.0).abs() < 1e-7);
        let cats = cat_basis(C64::new(2.0, 0.0), 25).unwrap();
        let psi = QState::basis(&[4], 1).unwrap().tensor(cats.c_plus());
        let (c, loss) = basis.compress_ket(&psi).unwrap();
        assert!(loss.abs() < 1e-12, "{loss}");
        let back = basis.lift_ket(&c).unwrap();
        assert!((back.overlap(&psi).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_dynamics_track_full_dynamics() {
        let p = ModelParams { delta: 0.1, ..ModelParams::default() };
        let dims = HilbertDims::new(10, 25).unwrap();
        let h = build_full_hamiltonian(&p, dims).unwrap();
        let cats = cat_basis(C64::new(2.0, 0.0), 25).unwrap();
        let psi = QState::basis(&[10], 0).unwrap().tensor(cats.c_plus());
        let basis = ReducedBasis::from_knr(&p, dims, 6).unwrap();
        let hc = basis.compress(&h).unwrap();
        let (pc, _) = basis.compress_ket(&psi).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, 7).unwrap();
        let full = evolve_schrodinger(&h, &psi, &grid).unwrap();
        let red = evolve_schrodinger(&hc, &pc, &grid).unwrap();
        for (f, r) in full.states.iter().zip(&red.states) {
            let pf = f.overlap(&psi).unwrap().norm_sqr();
            let pr = r.overlap(&pc).unwrap().norm_sqr();
            assert!((pf - pr).abs() < 1e-4, "{pf} vs {pr}");
        }
        assert!(ReducedBasis::from_knr(&p, dims, 1).is_err());
    }
}
