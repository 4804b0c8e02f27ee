//! Cat and pair-cat code spaces, projections onto them, displaced
//! eigenstates of the biased Rabi model and their tunneling couplings.
//!
//! Displacements follow the physics convention `D(z) = exp(z a† − z* a)`.
//! The literature form `exp[±α(a − a†)]` used for the displaced eigenstates
//! equals `D(∓α)` in this convention, so the `+x` branch sits at cavity
//! amplitude `−α` and the `−x` branch at `+α`.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::pauli;
use crate::qops::{self, check_truncation, HilbertDims, QOperator, QState, C64, ZERO};

/// Residual overlap above which the pair-cat kets are re-orthonormalized.
const LOWDIN_TRIGGER: f64 = 1e-10;

/// Minimum norm a displaced Fock state must keep inside the truncation.
const CAPTURED_NORM: f64 = 1.0 - 1e-8;

/// The two-dimensional cat manifold `{|C₋⟩, |C₊⟩}` of a KNR mode.
#[derive(Debug, Clone)]
pub struct CatBasis {
    beta: C64,
    dim_b: usize,
    c_plus: QState,
    c_minus: QState,
    norm_plus: f64,
    norm_minus: f64,
    /// Columns `|C₋⟩`, `|C₊⟩`.
    iso: Array2<C64>,
}

/// Builds `|C±⟩ = (|β⟩ ± |−β⟩)/√N±` from truncated coherent states.
pub fn cat_basis(beta: C64, dim_b: usize) -> Result<CatBasis> {
    CatBasis::new(beta, dim_b)
}

impl CatBasis {
    pub fn new(beta: C64, dim_b: usize) -> Result<Self> {
        if dim_b < 2 {
            return Err(Error::InvalidDimension { dim: dim_b, min: 2 });
        }
        if beta == ZERO {
            return Err(Error::InvalidParameter("cat states need β ≠ 0".into()));
        }
        check_truncation(beta, dim_b)?;
        let up = qops::coherent_state(beta, dim_b)?;
        let down = qops::coherent_state(-beta, dim_b)?;
        let (u, d) = (up.as_ket().unwrap(), down.as_ket().unwrap());
        let plus = u + d;
        let minus = u - d;
        let norm_plus = plus.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let norm_minus = minus.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let c_plus = QState::normalized_ket(&[dim_b], plus)?;
        let c_minus = QState::normalized_ket(&[dim_b], minus)?;
        let overlap = c_plus.overlap(&c_minus)?.norm();
        if overlap > 1e-10 {
            return Err(Error::Numeric(format!("cat states not orthogonal: {overlap:e}")));
        }
        let mut iso = Array2::zeros((dim_b, 2));
        iso.column_mut(0).assign(c_minus.as_ket().unwrap());
        iso.column_mut(1).assign(c_plus.as_ket().unwrap());
        Ok(Self { beta, dim_b, c_plus, c_minus, norm_plus, norm_minus, iso })
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn c_plus(&self) -> &QState {
        &self.c_plus
    }

    pub fn c_minus(&self) -> &QState {
        &self.c_minus
    }

    /// Squared norms `N±` of the unnormalized sums `|β⟩ ± |−β⟩`.
    pub fn normalizations(&self) -> (f64, f64) {
        (self.norm_plus, self.norm_minus)
    }

    /// `|±x⟩ = (|C₊⟩ ± |C₋⟩)/√2` on the KNR mode.
    pub fn x_state(&self, branch: Branch) -> QState {
        let s = branch.sign();
        let v = (self.c_plus.as_ket().unwrap() + &(self.c_minus.as_ket().unwrap() * s)) / C64::new(2f64.sqrt(), 0.0);
        QState::ket_unchecked(&[self.dim_b], v)
    }

    /// Rank-2 projector `|C₊⟩⟨C₊| + |C₋⟩⟨C₋|` on the KNR mode.
    pub fn projector(&self) -> QOperator {
        let m = self.iso.dot(&self.iso.t().mapv(|z| z.conj()));
        QOperator::new(&[self.dim_b], m).expect("square")
    }

    /// KNR-mode isometry with columns `|C₋⟩`, `|C₊⟩`.
    pub fn isometry(&self) -> &Array2<C64> {
        &self.iso
    }

    pub fn sigma_x(&self) -> QOperator {
        pauli::sigma_x()
    }

    pub fn sigma_y(&self) -> QOperator {
        pauli::sigma_y()
    }

    /// `|C₋⟩⟨C₋| − |C₊⟩⟨C₊|`.
    pub fn sigma_z(&self) -> QOperator {
        pauli::sigma_z()
    }

    /// `|C₋⟩⟨C₊|`.
    pub fn sigma_plus(&self) -> QOperator {
        pauli::sigma_plus()
    }

    /// `I_a ⊗ W`, mapping `[n_a, 2]` into `[n_a, dim_b]`.
    pub fn lifted_isometry(&self, n_a: usize) -> Array2<C64> {
        let n_b = self.dim_b;
        let mut w = Array2::zeros((n_a * n_b, n_a * 2));
        for i in 0..n_a {
            for j in 0..n_b {
                for q in 0..2 {
                    w[[i * n_b + j, i * 2 + q]] = self.iso[[j, q]];
                }
            }
        }
        w
    }

    /// Embeds an effective `[n_a, 2]` ket into the full `[n_a, dim_b]` space.
    pub fn embed(&self, state: &QState) -> Result<QState> {
        let dims = state.dims();
        if dims.len() != 2 || dims[1] != 2 {
            return Err(Error::DimensionMismatch { left: dims.to_vec(), right: vec![0, 2] });
        }
        let v = state.as_ket().ok_or_else(|| Error::InvalidParameter("embedding needs a ket".into()))?;
        let n_a = dims[0];
        let n_b = self.dim_b;
        let mut out = Array1::zeros(n_a * n_b);
        for i in 0..n_a {
            for j in 0..n_b {
                out[i * n_b + j] = self.iso[[j, 0]] * v[2 * i] + self.iso[[j, 1]] * v[2 * i + 1];
            }
        }
        Ok(QState::ket_unchecked(&[n_a, n_b], out))
    }
}

/// `⟨C_i|op|C_j⟩` in the `{|C₋⟩, |C₊⟩}` basis.
///
/// Single-mode KNR operators map to 2×2 matrices; operators on
/// `[n_a, dim_b]` map to `[n_a, 2]`, acting as the identity-lifted
/// projection on the cavity.
pub fn project_operator(op: &QOperator, basis: &CatBasis) -> Result<QOperator> {
    match op.dims() {
        [d] if *d == basis.dim_b => Ok(op.compress(&basis.iso, &[2])),
        [n_a, d] if *d == basis.dim_b => Ok(op.compress(&basis.lifted_isometry(*n_a), &[*n_a, 2])),
        other => Err(Error::DimensionMismatch { left: other.to_vec(), right: vec![basis.dim_b] }),
    }
}

/// Sign label of the displaced-oscillator branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    /// Cavity displacement of the branch for `α = g/Δ`.
    pub fn displacement(self, alpha: C64) -> C64 {
        -alpha * self.sign()
    }
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by three-term recurrence.
pub fn laguerre(n: usize, k: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + k - x) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Franck–Condon factor `⟨m|D(z)|n⟩` in closed form.
pub fn displaced_fock_overlap(m: usize, n: usize, z: C64) -> C64 {
    let x = z.norm_sqr();
    let mut amp = C64::new((-0.5 * x).exp(), 0.0);
    if m >= n {
        for k in n + 1..=m {
            amp *= z / (k as f64).sqrt();
        }
        amp * laguerre(n, (m - n) as f64, x)
    } else {
        let w = -z.conj();
        for k in m + 1..=n {
            amp *= w / (k as f64).sqrt();
        }
        amp * laguerre(m, (n - m) as f64, x)
    }
}

/// `D(z)|n⟩` truncated to `dim` levels.
pub fn displaced_fock_state(n: usize, z: C64, dim: usize) -> Result<QState> {
    if n >= dim {
        return Err(Error::OutOfRange { index: n, dim });
    }
    check_truncation(z, dim)?;
    let v: Array1<C64> = (0..dim).map(|m| displaced_fock_overlap(m, n, z)).collect();
    let captured = v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    if captured < CAPTURED_NORM {
        return Err(Error::TruncationTooSmall { amplitude: z.norm(), dim, required: dim + 1 });
    }
    QState::normalized_ket(&[dim], v)
}

fn qubit_x(branch: Branch) -> Array1<C64> {
    // basis order {C₋, C₊}
    let h = 1.0 / 2f64.sqrt();
    Array1::from(vec![C64::new(branch.sign() * h, 0.0), C64::new(h, 0.0)])
}

/// `|n±, ±x⟩` on the effective `[n_a, 2]` space.
pub fn displaced_qubit_state(n: usize, branch: Branch, alpha: C64, n_a: usize) -> Result<QState> {
    let cavity = displaced_fock_state(n, branch.displacement(alpha), n_a)?;
    let qubit = QState::ket_unchecked(&[2], qubit_x(branch));
    Ok(cavity.tensor(&qubit))
}

/// `|n±, ±x⟩ ≃ D(∓α)|n⟩ ⊗ (|C₊⟩ ± |C₋⟩)/√2` on the full `[n_a, dim_b]` space.
pub fn displaced_eigenstate(n: usize, branch: Branch, alpha: C64, basis: &CatBasis, n_a: usize) -> Result<QState> {
    let cavity = displaced_fock_state(n, branch.displacement(alpha), n_a)?;
    Ok(cavity.tensor(&basis.x_state(branch)))
}

/// Tunneling coupling `⟨m₊, +x|(δ̃/2)σ_z|(m+n)₋, −x⟩`.
///
/// Its modulus is `(δ̃/2)|⟨m|D(2α)|m+n⟩|`; the overall sign comes from
/// `⟨+x|σ_z|−x⟩ = −1`.
pub fn tunneling_matrix_element(m: usize, n: i64, alpha: C64, delta_tilde: f64) -> Result<C64> {
    let target = m as i64 + n;
    if target < 0 {
        return Err(Error::InvalidParameter(format!("m + n = {target} is negative")));
    }
    // ⟨m|D(−α)† D(α)|m+n⟩ = ⟨m|D(2α)|m+n⟩
    Ok(-displaced_fock_overlap(m, target as usize, 2.0 * alpha) * (delta_tilde / 2.0))
}

/// `(I ⊗ op_b)|ψ⟩` for a ket on `[n_a, n_b]` without forming the lift.
pub fn apply_on_b(op_b: &Array2<C64>, psi: &Array1<C64>, n_a: usize) -> Array1<C64> {
    let n_b = op_b.nrows();
    let mut out = Array1::zeros(n_a * n_b);
    for i in 0..n_a {
        let block = psi.slice(ndarray::s![i * n_b..(i + 1) * n_b]);
        out.slice_mut(ndarray::s![i * n_b..(i + 1) * n_b]).assign(&op_b.dot(&block));
    }
    out
}

/// `(op_a ⊗ I)|ψ⟩` for a ket on `[n_a, n_b]`.
pub fn apply_on_a(op_a: &Array2<C64>, psi: &Array1<C64>, n_b: usize) -> Array1<C64> {
    let n_a = op_a.nrows();
    let view = psi.view().into_shape_with_order((n_a, n_b)).expect("shape");
    let out = op_a.dot(&view);
    out.into_shape_with_order(n_a * n_b).expect("shape")
}

/// The pair-cat code `|μ±⟩ = (|α,+x⟩ ± |−α,−x⟩)/√2`.
///
/// `|α,+x⟩` denotes the `+x` displaced ground state (cavity amplitude `−α`
/// in the `D(z)` convention) and `|−α,−x⟩` its `−x` partner.
#[derive(Debug, Clone)]
pub struct PairCatBasis {
    alpha: C64,
    beta: C64,
    dims: HilbertDims,
    wells: [QState; 2],
    mu_plus: QState,
    mu_minus: QState,
    lowdin: bool,
}

pub fn pair_cat_basis(alpha: C64, beta: C64, dims: HilbertDims) -> Result<PairCatBasis> {
    PairCatBasis::new(alpha, beta, dims)
}

impl PairCatBasis {
    pub fn new(alpha: C64, beta: C64, dims: HilbertDims) -> Result<Self> {
        let dims = HilbertDims::new(dims.n_a, dims.n_b)?;
        check_truncation(alpha, dims.n_a)?;
        let cats = CatBasis::new(beta, dims.n_b)?;
        let s1 = qops::coherent_state(-alpha, dims.n_a)?.tensor(&cats.x_state(Branch::Plus));
        let s2 = qops::coherent_state(alpha, dims.n_a)?.tensor(&cats.x_state(Branch::Minus));
        let (u, v) = (s1.as_ket().unwrap(), s2.as_ket().unwrap());
        let r = C64::new(2f64.sqrt(), 0.0);
        let plus = (u + v) / r;
        let minus = (u - v) / r;
        let (plus, minus, lowdin) = lowdin_pair(plus, minus);
        let d = [dims.n_a, dims.n_b];
        Ok(Self {
            alpha,
            beta,
            dims,
            wells: [s1, s2],
            mu_plus: QState::normalized_ket(&d, plus)?,
            mu_minus: QState::normalized_ket(&d, minus)?,
            lowdin,
        })
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn mu_plus(&self) -> &QState {
        &self.mu_plus
    }

    pub fn mu_minus(&self) -> &QState {
        &self.mu_minus
    }

    /// The well states `|α,+x⟩` and `|−α,−x⟩`.
    pub fn wells(&self) -> &[QState; 2] {
        &self.wells
    }

    /// Whether symmetric re-orthonormalization was needed.
    pub fn was_reorthonormalized(&self) -> bool {
        self.lowdin
    }

    /// `P_μ = |μ₊⟩⟨μ₊| + |μ₋⟩⟨μ₋|`.
    pub fn projector(&self) -> QOperator {
        let p = QOperator::outer(&self.mu_plus, &self.mu_plus).unwrap();
        &p + &QOperator::outer(&self.mu_minus, &self.mu_minus).unwrap()
    }

    /// Columns `|μ₊⟩`, `|μ₋⟩`.
    pub fn isometry(&self) -> Array2<C64> {
        let n = self.dims.total();
        let mut w = Array2::zeros((n, 2));
        w.column_mut(0).assign(self.mu_plus.as_ket().unwrap());
        w.column_mut(1).assign(self.mu_minus.as_ket().unwrap());
        w
    }

    /// `1 − ⟨μ₊|ρ|μ₊⟩ − ⟨μ₋|ρ|μ₋⟩`.
    pub fn leakage(&self, state: &QState) -> Result<f64> {
        Ok(1.0 - state.population(&self.mu_plus)? - state.population(&self.mu_minus)?)
    }
}

/// Symmetric orthonormalization of two vectors when their overlap is not
/// negligible. Returns the flag telling whether anything changed.
fn lowdin_pair(u: Array1<C64>, v: Array1<C64>) -> (Array1<C64>, Array1<C64>, bool) {
    let s = crate::qops::state::inner(&u, &v);
    if s.norm() <= LOWDIN_TRIGGER {
        return (u, v, false);
    }
    let nu = crate::qops::state::inner(&u, &u).re;
    let nv = crate::qops::state::inner(&v, &v).re;
    let gram = Array2::from_shape_vec((2, 2), vec![C64::new(nu, 0.0), s, s.conj(), C64::new(nv, 0.0)]).unwrap();
    let (vals, vecs) = crate::qops::linalg::eigh(&gram);
    let inv_sqrt = Array2::from_shape_fn((2, 2), |(i, j)| {
        (0..2).map(|k| vecs[[i, k]] * vecs[[j, k]].conj() / vals[k].sqrt()).sum::<C64>()
    });
    let out_u = &u * inv_sqrt[[0, 0]] + &v * inv_sqrt[[1, 0]];
    let out_v = &u * inv_sqrt[[0, 1]] + &v * inv_sqrt[[1, 1]];
    (out_u, out_v, true)
}

/// Bias gaps of the two codes from direct matrix elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasReport {
    /// `⟨μ₊|b†b|μ₊⟩ − ⟨μ₋|b†b|μ₋⟩`.
    pub pair_dephasing_gap: C64,
    /// `⟨μ₊|b|μ₋⟩ − ⟨μ₋|b|μ₊⟩`.
    pub pair_flip_gap: C64,
    /// `⟨C₊|b†b|C₊⟩ − ⟨C₋|b†b|C₋⟩`.
    pub single_dephasing_gap: C64,
    /// `⟨C₊|b|C₋⟩ − ⟨C₋|b|C₊⟩`.
    pub single_flip_gap: C64,
}

/// Computes the four gaps.
///
/// The pair gaps are exponentially small differences of O(1) numbers, so
/// they are evaluated through the well states: with `|μ±⟩ = (s₁ ± s₂)/√2`,
/// `⟨μ₊|O|μ₊⟩ − ⟨μ₋|O|μ₋⟩ = ⟨s₁|O|s₂⟩ + ⟨s₂|O|s₁⟩` and
/// `⟨μ₊|O|μ₋⟩ − ⟨μ₋|O|μ₊⟩ = ⟨s₂|O|s₁⟩ − ⟨s₁|O|s₂⟩`. Both sides are still
/// matrix elements of the two-mode operators; only the cancellation is done
/// analytically. When the basis had to be re-orthonormalized the plain
/// differences are used instead.
pub fn bias_report(pair: &PairCatBasis, single: &CatBasis) -> Result<BiasReport> {
    if (pair.beta - single.beta).norm() > 1e-12 || pair.dims.n_b != single.dim_b {
        return Err(Error::InvalidParameter("pair and single bases use different β or n_b".into()));
    }
    let n_b = single.dim_b;
    let n_a = pair.dims.n_a;
    let b = qops::annihilation(n_b)?;
    let n = qops::number(n_b)?;
    let el = |bra: &QState, op: &Array2<C64>, ket: &QState| -> C64 {
        let out = apply_on_b(op, ket.as_ket().unwrap(), n_a);
        crate::qops::state::inner(bra.as_ket().unwrap(), &out)
    };
    let (pair_dephasing_gap, pair_flip_gap) = if pair.lowdin {
        let (p, m) = (&pair.mu_plus, &pair.mu_minus);
        (el(p, n.matrix(), p) - el(m, n.matrix(), m), el(p, b.matrix(), m) - el(m, b.matrix(), p))
    } else {
        let [s1, s2] = &pair.wells;
        (el(s1, n.matrix(), s2) + el(s2, n.matrix(), s1), el(s2, b.matrix(), s1) - el(s1, b.matrix(), s2))
    };
    let (cp, cm) = (&single.c_plus, &single.c_minus);
    Ok(BiasReport {
        pair_dephasing_gap,
        pair_flip_gap,
        single_dephasing_gap: n.matrix_element(cp, cp)? - n.matrix_element(cm, cm)?,
        single_flip_gap: b.matrix_element(cp, cm)? - b.matrix_element(cm, cp)?,
    })
}

/// Analytic single-cat gaps `(|β|²(A² − A⁻²), β(A⁻¹ − A))` in the sign
/// convention of [`bias_report`].
pub fn single_gaps_closed_form(beta: C64) -> (f64, C64) {
    let a = crate::models::anisotropy(beta);
    (beta.norm_sqr() * (a * a - 1.0 / (a * a)), beta * (1.0 / a - a))
}
