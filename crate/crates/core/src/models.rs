//! Hamiltonians and collapse sets of the driven KNR–cavity system, in the
//! full two-mode Fock space and in the effective cavity ⊗ cat-qubit space.
//!
//! Effective operators act on dims `[n_a, 2]`. The qubit basis is ordered
//! `{|C₋⟩, |C₊⟩}`, so `σ_z = diag(+1, −1)` and `σ₊ = |C₋⟩⟨C₊|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{self, check_truncation, HilbertDims, QOperator, C64, ONE, ZERO};

/// Builders reject Hamiltonians whose hermiticity error exceeds this.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Physical parameters, in units where the cavity detuning sets the scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Cavity detuning Δ.
    #[serde(rename = "Delta")]
    pub delta_c: f64,
    /// KNR detuning δ.
    pub delta: f64,
    pub lambda: C64,
    /// Kerr strength K.
    #[serde(rename = "K")]
    pub kerr: f64,
    /// Two-photon drive P.
    #[serde(rename = "P")]
    pub drive: C64,
    /// Linear drive Ω on the KNR.
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub delta_omega: f64,
    #[serde(rename = "delta_P")]
    pub delta_p: C64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_phi_a: f64,
    pub kappa_phi_b: f64,
}

impl Default for ModelParams {
    /// β = 2, K = 10, λ = 1, δ = 0, everything else off.
    fn default() -> Self {
        Self {
            delta_c: 1.0,
            delta: 0.0,
            lambda: ONE,
            kerr: 10.0,
            drive: C64::new(40.0, 0.0),
            omega: 0.0,
            delta_omega: 0.0,
            delta_p: ZERO,
            kappa_a: 0.0,
            kappa_b: 0.0,
            kappa_phi_a: 0.0,
            kappa_phi_b: 0.0,
        }
    }
}

impl ModelParams {
    /// All entries zero (K included); only useful as a builder baseline.
    pub fn zero() -> Self {
        Self {
            delta_c: 0.0,
            delta: 0.0,
            lambda: ZERO,
            kerr: 0.0,
            drive: ZERO,
            omega: 0.0,
            delta_omega: 0.0,
            delta_p: ZERO,
            kappa_a: 0.0,
            kappa_b: 0.0,
            kappa_phi_a: 0.0,
            kappa_phi_b: 0.0,
        }
    }

    /// Sets the two-photon drive so that `√(P/K) = beta`.
    pub fn with_beta(mut self, beta: C64) -> Self {
        self.drive = beta * beta * self.kerr;
        self
    }

    /// Checks finiteness, `K ≥ 0` and non-negative rates.
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("Delta", self.delta_c),
            ("delta", self.delta),
            ("K", self.kerr),
            ("Omega", self.omega),
            ("delta_omega", self.delta_omega),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_phi_a", self.kappa_phi_a),
            ("kappa_phi_b", self.kappa_phi_b),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        for (name, z) in [("lambda", self.lambda), ("P", self.drive), ("delta_P", self.delta_p)] {
            if !z.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.kerr < 0.0 {
            return Err(Error::InvalidParameter("K must be ≥ 0".into()));
        }
        for (name, v) in &reals[5..] {
            if *v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be ≥ 0")));
            }
        }
        Ok(())
    }

    /// Cat amplitude `β = √(P/K)` (principal root).
    ///
    /// A vanishing drive gives β = 0 even when K = 0, so an all-zero
    /// parameter set still builds.
    pub fn beta(&self) -> Result<C64> {
        if self.drive == ZERO {
            return Ok(ZERO);
        }
        if self.kerr == 0.0 {
            return Err(Error::InvalidParameter("K = 0 leaves β = √(P/K) undefined".into()));
        }
        let beta = (self.drive / self.kerr).sqrt();
        if !beta.is_finite() {
            return Err(Error::InvalidParameter("β = √(P/K) is not finite".into()));
        }
        Ok(beta)
    }
}

/// Parameters of the effective anisotropic Rabi model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveQRM {
    #[serde(rename = "Delta")]
    pub delta_c: f64,
    pub delta_tilde: f64,
    pub g: C64,
    /// Anisotropy `A = √tanh|β|²`.
    #[serde(rename = "A")]
    pub a: f64,
    pub epsilon: f64,
}

impl EffectiveQRM {
    /// The isotropic (A = 1) Rabi model with bias ε and no qubit splitting.
    pub fn ideal(delta_c: f64, g: f64, epsilon: f64) -> Self {
        Self { delta_c, delta_tilde: 0.0, g: C64::new(g, 0.0), a: 1.0, epsilon }
    }
}

/// `A = √tanh|β|²`.
pub fn anisotropy(beta: C64) -> f64 {
    beta.norm_sqr().tanh().sqrt()
}

/// `δ̃ = 2δ|β|² csch(2|β|²)`, with the β → 0 limit δ.
pub fn renormalized_detuning(delta: f64, beta: C64) -> f64 {
    let x = 2.0 * beta.norm_sqr();
    if x == 0.0 {
        return delta;
    }
    delta * x / x.sinh()
}

/// Inverse of [`renormalized_detuning`]: the KNR detuning giving `delta_tilde`.
pub fn detuning_for(delta_tilde: f64, beta: C64) -> f64 {
    let x = 2.0 * beta.norm_sqr();
    if x == 0.0 {
        return delta_tilde;
    }
    delta_tilde * x.sinh() / x
}

fn single(op: Result<QOperator>) -> QOperator {
    op.expect("dimension validated by caller")
}

/// Lifts a cavity operator to `[n_a, n_b]`.
pub(crate) fn on_a(op: &QOperator, n_b: usize) -> QOperator {
    op.tensor(&QOperator::identity(&[n_b]))
}

/// Lifts a KNR (or qubit) operator to `[n_a, n]`.
pub(crate) fn on_b(op: &QOperator, n_a: usize) -> QOperator {
    QOperator::identity(&[n_a]).tensor(op)
}

/// The KNR part `δ b†b − K b†²b² + P b†² + P* b²` on a single mode.
pub fn knr_hamiltonian(params: &ModelParams, n_b: usize) -> Result<QOperator> {
    let b = qops::annihilation(n_b)?;
    let bd = b.dagger();
    let b2 = &b * &b;
    let bd2 = b2.dagger();
    let kerr = &bd2 * &b2;
    let h = &(&(&(&bd * &b) * params.delta) - &(&kerr * params.kerr))
        + &(&(&bd2 * params.drive) + &(&b2 * params.drive.conj()));
    Ok(h)
}

/// The full rotating-frame Hamiltonian
/// `Δa†a + δb†b − K b†²b² + P b†² + P* b² + λ a b† + λ* a† b`.
pub fn build_full_hamiltonian(params: &ModelParams, dims: HilbertDims) -> Result<QOperator> {
    params.validate()?;
    let HilbertDims { n_a, n_b } = HilbertDims::new(dims.n_a, dims.n_b)?;
    check_truncation(params.beta()?, n_b)?;
    let a = single(qops::annihilation(n_a));
    let b = single(qops::annihilation(n_b));
    let cavity = &(&a.dagger() * &a) * params.delta_c;
    let coupling = a.tensor(&b.dagger()) * params.lambda;
    let h = &(&on_a(&cavity, n_b) + &on_b(&knr_hamiltonian(params, n_b)?, n_a)) + &(&coupling + &coupling.dagger());
    h.ensure_hermitian(HERMITIAN_TOL)?;
    Ok(h)
}

/// Parameter-error Hamiltonian `δ_ω b†b + δ_P b†² + δ_P* b²` on `[n_a, n_b]`.
pub fn build_error_hamiltonian(params: &ModelParams, dims: HilbertDims) -> Result<QOperator> {
    let HilbertDims { n_a, n_b } = HilbertDims::new(dims.n_a, dims.n_b)?;
    let b = single(qops::annihilation(n_b));
    let b2 = &b * &b;
    let h = &(&(&b.dagger() * &b) * params.delta_omega)
        + &(&(&b2.dagger() * params.delta_p) + &(&b2 * params.delta_p.conj()));
    let h = on_b(&h, n_a);
    h.ensure_hermitian(HERMITIAN_TOL)?;
    Ok(h)
}

/// Linear KNR drive `Ω(b + b†)` on `[n_a, n_b]`.
pub fn build_linear_drive(omega: f64, dims: HilbertDims) -> Result<QOperator> {
    let HilbertDims { n_a, n_b } = HilbertDims::new(dims.n_a, dims.n_b)?;
    let b = single(qops::annihilation(n_b));
    Ok(on_b(&(&(&b + &b.dagger()) * omega), n_a))
}

/// Derives the effective Rabi-model parameters.
///
/// `g = λβ*` is the exact projection of `λ a b†`; it equals λβ for real β.
/// The bias `ε = 4|β|Ω` assumes a real cat amplitude.
pub fn effective_qrm_params(params: &ModelParams) -> Result<EffectiveQRM> {
    params.validate()?;
    if params.kerr == 0.0 {
        return Err(Error::InvalidParameter("K must be > 0 for the cat-qubit projection".into()));
    }
    let beta = params.beta()?;
    Ok(EffectiveQRM {
        delta_c: params.delta_c,
        delta_tilde: renormalized_detuning(params.delta, beta),
        g: params.lambda * beta.conj(),
        a: anisotropy(beta),
        epsilon: 4.0 * beta.norm() * params.omega,
    })
}

/// Qubit Pauli matrices in the `{|C₋⟩, |C₊⟩}` basis.
pub mod pauli {
    use super::*;

    pub fn sigma_x() -> QOperator {
        mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> QOperator {
        mat2([[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]])
    }

    pub fn sigma_z() -> QOperator {
        mat2([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `σ₊ = |C₋⟩⟨C₊|`.
    pub fn sigma_plus() -> QOperator {
        mat2([[ZERO, ONE], [ZERO, ZERO]])
    }

    pub fn sigma_minus() -> QOperator {
        sigma_plus().dagger()
    }

    pub(crate) fn mat2(m: [[C64; 2]; 2]) -> QOperator {
        let arr = ndarray::Array2::from_shape_fn((2, 2), |(i, j)| m[i][j]);
        QOperator::new(&[2], arr).expect("2x2")
    }
}

/// `Δa†a + (δ̃/2)σ_z + (ε/2)σ_x + [g(σ₊/A + Aσ₋)a + h.c.]` on `[n_a, 2]`.
///
/// The constant energy of the cat manifold is dropped.
pub fn build_effective_qrm(eff: &EffectiveQRM, n_a: usize) -> Result<QOperator> {
    if n_a < 2 {
        return Err(Error::InvalidDimension { dim: n_a, min: 2 });
    }
    if !(eff.a > 0.0 && eff.a.is_finite()) {
        return Err(Error::InvalidParameter("anisotropy A must be positive and finite".into()));
    }
    let a = single(qops::annihilation(n_a));
    let qubit = &(&pauli::sigma_z() * (eff.delta_tilde / 2.0)) + &(&pauli::sigma_x() * (eff.epsilon / 2.0));
    let flip = &(&pauli::sigma_plus() * (1.0 / eff.a)) + &(&pauli::sigma_minus() * eff.a);
    let coupling = a.tensor(&flip) * eff.g;
    let h = &(&on_a(&(&(&a.dagger() * &a) * eff.delta_c), 2) + &on_b(&qubit, n_a)) + &(&coupling + &coupling.dagger());
    h.ensure_hermitian(HERMITIAN_TOL)?;
    Ok(h)
}

/// A dissipator channel `κ D[op]`.
pub type Collapse = (QOperator, f64);

/// `(a, κ_a)`, `(b, κ_b)`, `(a†a, κ_a^φ)`, `(b†b, κ_b^φ)` with zero rates dropped.
pub fn collapse_operators(params: &ModelParams, dims: HilbertDims) -> Result<Vec<Collapse>> {
    params.validate()?;
    let HilbertDims { n_a, n_b } = HilbertDims::new(dims.n_a, dims.n_b)?;
    let a = single(qops::annihilation(n_a));
    let b = single(qops::annihilation(n_b));
    let mut out = Vec::new();
    if params.kappa_a > 0.0 {
        out.push((on_a(&a, n_b), params.kappa_a));
    }
    if params.kappa_b > 0.0 {
        out.push((on_b(&b, n_a), params.kappa_b));
    }
    if params.kappa_phi_a > 0.0 {
        out.push((on_a(&(&a.dagger() * &a), n_b), params.kappa_phi_a));
    }
    if params.kappa_phi_b > 0.0 {
        out.push((on_b(&(&b.dagger() * &b), n_a), params.kappa_phi_b));
    }
    Ok(out)
}

/// Which loss rate multiplies the projected qubit-flip dissipator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipRate {
    /// KNR loss `κ_b`, the channel that actually generates the flips.
    #[default]
    KappaB,
    /// Cavity loss `κ_a`.
    KappaA,
}

/// Projected flip operator `(A+A⁻¹)/2 σ_x + i(A−A⁻¹)/2 σ_y`, i.e. `b/β`
/// restricted to the cat manifold.
pub fn projected_flip_operator(a: f64) -> QOperator {
    let x = &pauli::sigma_x() * ((a + 1.0 / a) / 2.0);
    let y = pauli::sigma_y().scaled(C64::new(0.0, (a - 1.0 / a) / 2.0));
    &x + &y
}

/// Projected dephasing operator `(A²+A⁻²)/2·1 − (A²−A⁻²)/2 σ_z`, i.e.
/// `b†b/|β|²` on the cat manifold.
pub fn projected_dephasing_operator(a: f64) -> QOperator {
    let a2 = a * a;
    let id = &QOperator::identity(&[2]) * ((a2 + 1.0 / a2) / 2.0);
    &id - &(&pauli::sigma_z() * ((a2 - 1.0 / a2) / 2.0))
}

/// Effective Hamiltonian and collapse set on `[n_a, 2]`.
pub fn build_projected_master_equation(
    eff: &EffectiveQRM,
    params: &ModelParams,
    n_a: usize,
    flip_rate: FlipRate,
) -> Result<(QOperator, Vec<Collapse>)> {
    params.validate()?;
    let h = build_effective_qrm(eff, n_a)?;
    let beta2 = params.beta()?.norm_sqr();
    let a = single(qops::annihilation(n_a));
    let mut out = Vec::new();
    if params.kappa_a > 0.0 {
        out.push((on_a(&a, 2), params.kappa_a));
    }
    if params.kappa_phi_a > 0.0 {
        out.push((on_a(&(&a.dagger() * &a), 2), params.kappa_phi_a));
    }
    let flip = match flip_rate {
        FlipRate::KappaB => params.kappa_b,
        FlipRate::KappaA => params.kappa_a,
    } * beta2;
    if flip > 0.0 {
        out.push((on_b(&projected_flip_operator(eff.a), n_a), flip));
    }
    let dephasing = params.kappa_phi_b * beta2 * beta2;
    if dephasing > 0.0 {
        out.push((on_b(&projected_dephasing_operator(eff.a), n_a), dephasing));
    }
    Ok((h, out))
}
