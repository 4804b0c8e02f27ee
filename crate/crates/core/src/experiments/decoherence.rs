//! Leakage out of the single-cat and pair-cat code spaces under loss and
//! dephasing.

use serde::{Deserialize, Serialize};

use super::{echo, Column, ScenarioResult, Table};
use crate::catspace::{cat_basis, pair_cat_basis};
use crate::dynamics::{observe_lindblad, ReducedBasis, SolverOptions, TimeGrid};
use crate::error::{Error, Result};
use crate::models::{build_full_hamiltonian, build_linear_drive, collapse_operators, ModelParams};
use crate::qops::{HilbertDims, QState, C64};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Code {
    /// `{|C₊⟩, |C₋⟩}` on the KNR, starting from `|0, C₊⟩`.
    SingleCat,
    /// `{|μ₊⟩, |μ₋⟩}` with `α = |λβ|/Δ`, starting from `|μ₊⟩`.
    #[default]
    PairCat,
}

/// Lindblad evolution with the four channels of `params` (the linear drive
/// `Ω` included) on a KNR compressed to its `levels` highest eigenstates.
///
/// Columns: `time`, `leakage` with `1 − ⟨C₊|ρ_b|C₊⟩ − ⟨C₋|ρ_b|C₋⟩`
/// (`ρ_b = Tr_a ρ`) or `1 − ⟨μ₊|ρ|μ₊⟩ − ⟨μ₋|ρ|μ₋⟩`.
pub fn run_decoherence(
    params: &ModelParams,
    code: Code,
    dims: HilbertDims,
    grid: &TimeGrid,
    levels: usize,
) -> Result<ScenarioResult> {
    if code == Code::PairCat && params.delta != 0.0 {
        return Err(Error::InvalidParameter("the pair-cat code needs delta = 0".into()));
    }
    let beta = params.beta()?;
    let mut h = build_full_hamiltonian(params, dims)?;
    if params.omega != 0.0 {
        h = &h + &build_linear_drive(params.omega, dims)?;
    }
    let reduced = ReducedBasis::from_knr(params, dims, levels)?;
    let hc = reduced.compress(&h)?;
    let collapse = collapse_operators(params, dims)?
        .iter()
        .map(|(op, rate)| Ok((reduced.compress(op)?, *rate)))
        .collect::<Result<Vec<_>>>()?;

    let cats = cat_basis(beta, dims.n_b)?;
    let (psi0, loss, code_states) = match code {
        Code::SingleCat => {
            let full = QState::basis(&[dims.n_a], 0)?.tensor(cats.c_plus());
            let (c, loss) = reduced.compress_ket(&full)?;
            // cat vectors in the retained KNR basis
            let vh = reduced.knr_isometry().t().mapv(|z| z.conj());
            let m = reduced.levels();
            let cp = QState::ket_unchecked(&[m], vh.dot(cats.c_plus().as_ket().unwrap()));
            let cm = QState::ket_unchecked(&[m], vh.dot(cats.c_minus().as_ket().unwrap()));
            (c, loss, [cp, cm])
        }
        Code::PairCat => {
            let alpha = C64::new((params.lambda * beta).norm() / params.delta_c, 0.0);
            let pair = pair_cat_basis(alpha, beta, dims)?;
            let (p, loss) = reduced.compress_ket(pair.mu_plus())?;
            let (m, loss_m) = reduced.compress_ket(pair.mu_minus())?;
            (p.clone(), loss.max(loss_m), [p, m])
        }
    };

    let mut leakage = Vec::with_capacity(grid.n_points);
    let stats = observe_lindblad(&hc, &collapse, &psi0, grid, &SolverOptions::default(), |_, _, rho| {
        let kept = match code {
            Code::SingleCat => {
                let rb = rho.trace_out_first()?;
                rb.population(&code_states[0])? + rb.population(&code_states[1])?
            }
            Code::PairCat => rho.population(&code_states[0])? + rho.population(&code_states[1])?,
        };
        leakage.push(1.0 - kept);
        Ok(())
    })?;

    let final_leakage = *leakage.last().expect("grid has points");
    let max_leakage = leakage.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let table = Table::new("decoherence", vec![Column::real("time", grid.times()), Column::real("leakage", leakage)])?;
    let mut result = ScenarioResult::new(
        "decoherence",
        table,
        echo(&serde_json::json!({
            "params": params,
            "code": code,
            "dims": dims,
            "grid": grid,
            "levels": levels,
        })),
    );
    result.metrics.insert("final_leakage".into(), final_leakage);
    result.metrics.insert("max_leakage".into(), max_leakage);
    result.metrics.insert("compression_loss".into(), loss.abs());
    result.solver = stats;
    Ok(result)
}
