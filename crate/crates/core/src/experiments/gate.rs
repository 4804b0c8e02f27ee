//! The pair-cat Pauli-X gate: a linear KNR drive applied for `t = π/ε`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average_gate_fidelity, code_matrix_fidelity, echo, Column, GateFidelityInput, ScenarioResult, Table};
use crate::catspace::{pair_cat_basis, PairCatBasis};
use crate::dynamics::{
    evolution_operator, observe_lindblad, observe_schrodinger, ReducedBasis, SolverOptions, SolverStats, TimeGrid,
    Tolerances,
};
use crate::error::{Error, Result};
use crate::models::{
    build_error_hamiltonian, build_full_hamiltonian, build_linear_drive, collapse_operators, ModelParams,
};
use crate::qops::{HilbertDims, QOperator, QState, C64, ZERO};

/// How the gate propagator is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMethod {
    /// Integrate the two code kets with tight tolerances.
    #[default]
    Ode,
    /// Full matrix exponential `exp(−iHt)`.
    Expm,
    /// Lindblad propagation of the code-space operator basis with the rates
    /// of the parameters, on a KNR compressed to [`CHANNEL_LEVELS`] levels.
    Lindblad,
}

/// KNR levels kept by [`GateMethod::Lindblad`] in [`xgate_outcome`].
pub const CHANNEL_LEVELS: usize = 4;

/// Tolerances used for the code-ket propagation.
const GATE_TOLERANCES: Tolerances = Tolerances { rtol: 1e-11, atol: 1e-13, max_steps: 50_000_000 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateOutcome {
    pub fidelity: f64,
    /// `1 − Σ_k |⟨μ_k|U|μ_j⟩|²` for `j = +, −`.
    pub leakage: [f64; 2],
    pub epsilon: f64,
    pub t_gate: f64,
    pub stats: SolverStats,
}

/// `U_X = |μ₊⟩⟨μ₋| + |μ₋⟩⟨μ₊|`.
pub fn pauli_x_target(pair: &PairCatBasis) -> QOperator {
    let a = QOperator::outer(pair.mu_plus(), pair.mu_minus()).expect("same dims");
    &a + &a.dagger()
}

fn has_errors(params: &ModelParams) -> bool {
    params.delta_omega != 0.0 || params.delta_p != ZERO
}

/// Average fidelity of the X gate on the pair-cat code with amplitudes
/// `(alpha, β)`, `β = √(P/K)`.
pub fn xgate_outcome(params: &ModelParams, alpha: C64, dims: HilbertDims, method: GateMethod) -> Result<GateOutcome> {
    xgate_outcome_with_levels(params, alpha, dims, method, CHANNEL_LEVELS)
}

/// [`xgate_outcome`] with the KNR level count of the Lindblad method set
/// explicitly; the other methods ignore `levels`.
pub fn xgate_outcome_with_levels(
    params: &ModelParams,
    alpha: C64,
    dims: HilbertDims,
    method: GateMethod,
    levels: usize,
) -> Result<GateOutcome> {
    let dissipative =
        params.kappa_a > 0.0 || params.kappa_b > 0.0 || params.kappa_phi_a > 0.0 || params.kappa_phi_b > 0.0;
    if dissipative && method != GateMethod::Lindblad {
        return Err(Error::InvalidParameter("loss and dephasing rates need the lindblad gate method".into()));
    }
    if params.delta != 0.0 {
        return Err(Error::InvalidParameter("the pair-cat gate needs delta = 0".into()));
    }
    if params.omega.is_nan() || params.omega <= 0.0 {
        return Err(Error::InvalidParameter("Omega must be > 0: the gate time π/ε diverges at ε = 0".into()));
    }
    let beta = params.beta()?;
    let epsilon = 4.0 * beta.norm() * params.omega;
    let t_gate = std::f64::consts::PI / epsilon;
    let mut h = &build_full_hamiltonian(params, dims)? + &build_linear_drive(params.omega, dims)?;
    if has_errors(params) {
        h = &h + &build_error_hamiltonian(params, dims)?;
    }
    let pair = pair_cat_basis(alpha, beta, dims)?;
    let code = [pair.mu_plus(), pair.mu_minus()];

    let (fidelity, images, stats) = match method {
        GateMethod::Ode => {
            let grid = TimeGrid::new(0.0, t_gate, 2)?;
            let opts = SolverOptions { tolerances: GATE_TOLERANCES, ..SolverOptions::default() };
            let mut stats = SolverStats::default();
            let mut images = Vec::with_capacity(2);
            for psi in code {
                let mut last = None;
                let s = observe_schrodinger(&h, psi, &grid, &opts, |idx, _, state| {
                    if idx == 1 {
                        last = Some(state.clone());
                    }
                    Ok(())
                })?;
                stats.merge(&s);
                images.push(last.expect("final sample"));
            }
            // M = U_X† B† U B; U_X swaps the code words
            let m = Array2::from_shape_fn((2, 2), |(i, j)| code[1 - i].overlap(&images[j]).unwrap_or(ZERO));
            (code_matrix_fidelity(&m)?, images, stats)
        }
        GateMethod::Expm => {
            let u = evolution_operator(&h, t_gate)?;
            let input = GateFidelityInput {
                u_actual: u.clone(),
                u_target: pauli_x_target(&pair),
                projector: pair.projector(),
                d: 2,
            };
            let f = average_gate_fidelity(&input)?;
            let images = code.iter().map(|psi| u.apply(psi)).collect::<Result<Vec<_>>>()?;
            (f, images, SolverStats::default())
        }
        GateMethod::Lindblad => {
            let (fidelity, leakage, stats) = channel_fidelity(params, &h, &pair, dims, levels, t_gate)?;
            return Ok(GateOutcome { fidelity, leakage, epsilon, t_gate, stats });
        }
    };
    let leak = |img: &QState| -> Result<f64> { pair.leakage(img) };
    Ok(GateOutcome { fidelity, leakage: [leak(&images[0])?, leak(&images[1])?], epsilon, t_gate, stats })
}

fn sandwich(bra: &QState, rho: &QState, ket: &QState) -> C64 {
    let (a, b) = (bra.as_ket().unwrap(), ket.as_ket().unwrap());
    let r = rho.as_density().unwrap();
    a.mapv(|z| z.conj()).dot(&r.dot(b))
}

/// Average gate fidelity of the propagated channel `E` against `U_X`:
/// `F = [Σ_{jl} ⟨l|U_X†E(|j⟩⟨j|)U_X|l⟩ + Σ_{jk} ⟨j|U_X†E(|j⟩⟨k|)U_X|k⟩]/(d² + d)`,
/// which reduces to the unitary formula when `E` is unitary. The coherences
/// `E(|0⟩⟨1|)` come from the images of `|±⟩` and `|+i⟩` by linearity.
fn channel_fidelity(
    params: &ModelParams,
    h: &QOperator,
    pair: &PairCatBasis,
    dims: HilbertDims,
    levels: usize,
    t_gate: f64,
) -> Result<(f64, [f64; 2], SolverStats)> {
    let reduced = ReducedBasis::from_knr(params, dims, levels)?;
    let hc = reduced.compress(h)?;
    let collapse = collapse_operators(params, dims)?
        .iter()
        .map(|(op, rate)| Ok((reduced.compress(op)?, *rate)))
        .collect::<Result<Vec<_>>>()?;
    let code = [reduced.compress_ket(pair.mu_plus())?.0, reduced.compress_ket(pair.mu_minus())?.0];
    let (c0, c1) = (code[0].as_ket().unwrap(), code[1].as_ket().unwrap());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = QState::ket_unchecked(&reduced.dims(), (c0 + c1).mapv(|z| z * s));
    let plus_i = QState::ket_unchecked(&reduced.dims(), (c0 + &c1.mapv(|z| z * C64::i())).mapv(|z| z * s));

    let grid = TimeGrid::new(0.0, t_gate, 2)?;
    let mut stats = SolverStats::default();
    let mut image = |psi: &QState| -> Result<QState> {
        let mut last = None;
        let st = observe_lindblad(&hc, &collapse, psi, &grid, &SolverOptions::default(), |idx, _, rho| {
            if idx == 1 {
                last = Some(rho.clone());
            }
            Ok(())
        })?;
        stats.merge(&st);
        Ok(last.expect("final sample"))
    };
    let diag = [image(&code[0])?, image(&code[1])?];
    let (e_plus, e_plus_i) = (image(&plus)?, image(&plus_i)?);

    // ⟨a|E(|j⟩⟨k|)|b⟩ for the operator basis of the code space
    let element = |j: usize, k: usize, a: &QState, b: &QState| -> C64 {
        if j == k {
            return sandwich(a, &diag[j], b);
        }
        let e01 = sandwich(a, &e_plus, b) + C64::i() * sandwich(a, &e_plus_i, b)
            - C64::new(0.5, 0.5) * (sandwich(a, &diag[0], b) + sandwich(a, &diag[1], b));
        if j == 0 {
            e01
        } else {
            // E(|1⟩⟨0|) = E(|0⟩⟨1|)†
            (sandwich(b, &e_plus, a) + C64::i() * sandwich(b, &e_plus_i, a)
                - C64::new(0.5, 0.5) * (sandwich(b, &diag[0], a) + sandwich(b, &diag[1], a)))
            .conj()
        }
    };
    let kept = |j: usize| element(j, j, &code[0], &code[0]).re + element(j, j, &code[1], &code[1]).re;
    let populations = kept(0) + kept(1);
    let mut coherent = ZERO;
    for j in 0..2 {
        for k in 0..2 {
            coherent += element(j, k, &code[1 - j], &code[1 - k]);
        }
    }
    let fidelity = (populations + coherent.re) / 6.0;
    Ok((fidelity, [1.0 - kept(0), 1.0 - kept(1)], stats))
}

/// Single X gate. When `params` carries error terms the nominal gate is run
/// too and the infidelity increase is reported. `levels` only matters for
/// [`GateMethod::Lindblad`].
pub fn run_xgate(
    params: &ModelParams,
    alpha: C64,
    dims: HilbertDims,
    method: GateMethod,
    levels: usize,
) -> Result<ScenarioResult> {
    let out = xgate_outcome_with_levels(params, alpha, dims, method, levels)?;
    let mut stats = out.stats;
    let nominal = if has_errors(params) {
        let clean = ModelParams { delta_omega: 0.0, delta_p: ZERO, ..*params };
        let o = xgate_outcome_with_levels(&clean, alpha, dims, method, levels)?;
        stats.merge(&o.stats);
        o.fidelity
    } else {
        out.fidelity
    };
    let beta = params.beta()?;
    let table = Table::new(
        "xgate",
        vec![
            Column::complex("alpha", vec![alpha]),
            Column::complex("beta", vec![beta]),
            Column::real("epsilon", vec![out.epsilon]),
            Column::real("t_gate", vec![out.t_gate]),
            Column::real("fidelity", vec![out.fidelity]),
            Column::real("fidelity_nominal", vec![nominal]),
            Column::real("leakage_plus", vec![out.leakage[0]]),
            Column::real("leakage_minus", vec![out.leakage[1]]),
        ],
    )?;
    let mut result = ScenarioResult::new(
        "xgate",
        table,
        echo(&serde_json::json!({
            "params": params,
            "alpha": alpha,
            "dims": dims,
            "method": method,
            "levels": levels,
        })),
    );
    result.metrics.insert("fidelity".into(), out.fidelity);
    result.metrics.insert("fidelity_nominal".into(), nominal);
    result.metrics.insert("infidelity_increase".into(), nominal - out.fidelity);
    result.metrics.insert("max_leakage".into(), out.leakage[0].max(out.leakage[1]));
    result.solver = stats;
    Ok(result)
}

/// F_X over an `(α, β)` grid at fixed bias ε, with `λ = αΔ/β` so that the
/// cavity displacement `λβ/Δ` matches α. Rows are α-major.
pub fn run_xgate_sweep(
    template: &ModelParams,
    epsilon: f64,
    alphas: &[f64],
    betas: &[f64],
    dims: HilbertDims,
) -> Result<ScenarioResult> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter("epsilon must be > 0".into()));
    }
    if alphas.iter().chain(betas).any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter("sweep amplitudes must be positive".into()));
    }
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let runs: Vec<Result<GateOutcome>> = points
        .par_iter()
        .map(|&(a, b)| {
            let p = ModelParams {
                lambda: C64::new(a * template.delta_c / b, 0.0),
                omega: epsilon / (4.0 * b),
                ..template.with_beta(C64::new(b, 0.0))
            };
            xgate_outcome(&p, C64::new(a, 0.0), dims, GateMethod::Ode)
        })
        .collect();
    let mut fid = Vec::with_capacity(points.len());
    let mut leak = Vec::with_capacity(points.len());
    let mut stats = SolverStats::default();
    for r in runs {
        let o = r?;
        fid.push(o.fidelity);
        leak.push(o.leakage[0].max(o.leakage[1]));
        stats.merge(&o.stats);
    }
    let table = Table::new(
        "xgate_sweep",
        vec![
            Column::real("alpha", points.iter().map(|p| p.0).collect()),
            Column::real("beta", points.iter().map(|p| p.1).collect()),
            Column::real("fidelity", fid.clone()),
            Column::real("max_leakage", leak),
        ],
    )?;
    let mut result = ScenarioResult::new(
        "xgate_sweep",
        table,
        echo(&serde_json::json!({
            "params": template,
            "epsilon": epsilon,
            "alphas": alphas,
            "betas": betas,
            "dims": dims,
        })),
    );
    let mut diagonal: Vec<(f64, f64)> =
        points.iter().zip(&fid).filter(|(p, _)| p.0 == p.1).map(|(p, f)| (p.0, *f)).collect();
    diagonal.sort_by(|x, y| x.0.total_cmp(&y.0));
    if diagonal.len() >= 2 {
        let min_step = diagonal.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::INFINITY, f64::min);
        result.metrics.insert("diagonal_min_increment".into(), min_step);
    }
    result.metrics.insert("max_fidelity".into(), fid.iter().copied().fold(0.0, f64::max));
    result.metrics.insert("min_fidelity".into(), fid.iter().copied().fold(1.0, f64::min));
    result.solver = stats;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate_params(beta: f64) -> ModelParams {
        ModelParams { omega: 0.5 / (4.0 * beta), ..ModelParams::default() }.with_beta(C64::new(beta, 0.0))
    }

    #[test]
    fn both_paths_agree() {
        let p = ModelParams { lambda: C64::new(0.5, 0.0), ..gate_params(1.0) };
        let dims = HilbertDims::new(14, 16).unwrap();
        let alpha = C64::new(0.5, 0.0);
        let ode = xgate_outcome(&p, alpha, dims, GateMethod::Ode).unwrap();
        let expm = xgate_outcome(&p, alpha, dims, GateMethod::Expm).unwrap();
        assert!((ode.fidelity - expm.fidelity).abs() < 1e-8, "{} vs {}", ode.fidelity, expm.fidelity);
        assert!((ode.leakage[0] - expm.leakage[0]).abs() < 1e-8);
        assert!(ode.fidelity > 0.9);
    }

    #[test]
    fn rejects_undriven_or_detuned_gate() {
        let dims = HilbertDims::new(8, 16).unwrap();
        let idle = ModelParams { omega: 0.0, ..gate_params(1.0) };
        assert!(matches!(
            xgate_outcome(&idle, C64::new(1.0, 0.0), dims, GateMethod::Ode),
            Err(Error::InvalidParameter(_))
        ));
        let detuned = ModelParams { delta: 0.1, ..gate_params(1.0) };
        assert!(xgate_outcome(&detuned, C64::new(1.0, 0.0), dims, GateMethod::Ode).is_err());
    }

    #[test]
    fn single_point_sweep_equals_single_gate() {
        let dims = HilbertDims::new(16, 16).unwrap();
        let template = ModelParams { lambda: C64::new(1.0, 0.0), ..ModelParams::default() };
        let sweep = run_xgate_sweep(&template, 0.5, &[1.0], &[1.0], dims).unwrap();
        let p = ModelParams { lambda: C64::new(1.0, 0.0), ..gate_params(1.0) };
        let single = xgate_outcome(&p, C64::new(1.0, 0.0), dims, GateMethod::Ode).unwrap();
        assert_eq!(sweep.table.real("fidelity").unwrap()[0], single.fidelity);
        assert_eq!(sweep.table.n_rows(), 1);
    }

    #[test]
    fn closed_channel_matches_unitary_gate() {
        let p = ModelParams { lambda: C64::new(0.5, 0.0), ..gate_params(1.0) };
        let dims = HilbertDims::new(14, 16).unwrap();
        let alpha = C64::new(0.5, 0.0);
        let ode = xgate_outcome(&p, alpha, dims, GateMethod::Ode).unwrap();
        let ch = xgate_outcome_with_levels(&p, alpha, dims, GateMethod::Lindblad, 6).unwrap();
        assert!((ode.fidelity - ch.fidelity).abs() < 1e-6, "{} vs {}", ode.fidelity, ch.fidelity);
    }

    #[test]
    fn knr_loss_lowers_channel_fidelity() {
        let p = ModelParams { lambda: C64::new(0.5, 0.0), ..gate_params(1.0) };
        let dims = HilbertDims::new(14, 16).unwrap();
        let alpha = C64::new(0.5, 0.0);
        let closed = xgate_outcome(&p, alpha, dims, GateMethod::Lindblad).unwrap();
        let lossy = ModelParams { kappa_b: 0.05, ..p };
        assert!(xgate_outcome(&lossy, alpha, dims, GateMethod::Ode).is_err());
        let open = xgate_outcome(&lossy, alpha, dims, GateMethod::Lindblad).unwrap();
        assert!(open.fidelity < closed.fidelity - 1e-3);
        assert!(open.stats.max_norm_drift < 1e-8);
    }

    #[test]
    fn coupling_near_the_gap_costs_fidelity() {
        // λ = 1.5 against E_gap ≈ 4K|β|²: 40 for K = 10, 4 for K = 1
        let dims = HilbertDims::new(20, 16).unwrap();
        let f = |kerr| {
            let template = ModelParams { kerr, ..ModelParams::default() };
            run_xgate_sweep(&template, 0.5, &[1.5], &[1.0], dims).unwrap().table.real("fidelity").unwrap()[0]
        };
        let (safe, crowded) = (f(10.0), f(1.0));
        assert!(crowded < safe - 0.01, "{safe} vs {crowded}");
    }
}
