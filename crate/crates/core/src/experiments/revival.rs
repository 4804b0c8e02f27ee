//! Collapse and revival of `|0, C₊⟩`, validity of the effective Rabi model
//! and robustness against drive-parameter errors.

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use super::{echo, revival_probability_analytic, Column, ScenarioResult, Table};
use crate::catspace::{cat_basis, CatBasis};
use crate::dynamics::{observe_schrodinger, SolverOptions, SolverStats, TimeGrid};
use crate::error::{Error, Result};
use crate::models::{
    build_effective_qrm, build_error_hamiltonian, build_full_hamiltonian, effective_qrm_params, EffectiveQRM,
    ModelParams,
};
use crate::qops::{HilbertDims, QOperator, QState, C64};

/// `|0, C₊⟩` on the full space.
fn vacuum_cat(basis: &CatBasis, n_a: usize) -> Result<QState> {
    Ok(QState::basis(&[n_a], 0)?.tensor(basis.c_plus()))
}

fn cat_for(params: &ModelParams, n_b: usize) -> Result<CatBasis> {
    cat_basis(params.beta()?, n_b)
}

/// `⟨Π⟩` of a full-space ket from its cat-manifold amplitudes per photon number.
fn full_parity(psi: &Array1<C64>, basis: &CatBasis, n_a: usize) -> f64 {
    let n_b = basis.dim_b();
    let w = basis.isometry();
    let mut acc = 0.0;
    for n in 0..n_a {
        let block = psi.slice(ndarray::s![n * n_b..(n + 1) * n_b]);
        let amp =
            |q: usize| -> f64 { block.iter().zip(w.column(q)).map(|(x, c)| c.conj() * x).sum::<C64>().norm_sqr() };
        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
        acc += sign * (amp(0) - amp(1));
    }
    acc
}

/// Survival probability of `psi0` under `h`, sampled on `grid`.
fn survival(h: &QOperator, psi0: &QState, grid: &TimeGrid) -> Result<(Vec<f64>, SolverStats)> {
    let mut out = Vec::with_capacity(grid.n_points);
    let stats = observe_schrodinger(h, psi0, grid, &SolverOptions::default(), |_, _, psi| {
        out.push(psi.population(psi0)?);
        Ok(())
    })?;
    Ok((out, stats))
}

#[derive(Serialize)]
struct Echo<'a, T: Serialize> {
    params: &'a ModelParams,
    dims: HilbertDims,
    #[serde(flatten)]
    extra: T,
}

/// Collapse and revival of `|0, C₊⟩` under the full Hamiltonian.
///
/// Main columns: `time`, `p_revival_numeric` (full model),
/// `p_revival_analytic` (`exp(−|γ(t)|²)` with `g = |λβ|`),
/// `p_revival_effective` (ideal isotropic Rabi model, δ̃ = 0) and `parity`.
/// The companion table `photon_distribution` holds `P(n)` of the cavity per
/// sample.
pub fn run_collapse_revival(params: &ModelParams, dims: HilbertDims, grid: &TimeGrid) -> Result<ScenarioResult> {
    if params.delta != 0.0 {
        return Err(Error::InvalidParameter("collapse and revival needs delta = 0".into()));
    }
    let h = build_full_hamiltonian(params, dims)?;
    let basis = cat_for(params, dims.n_b)?;
    let psi0 = vacuum_cat(&basis, dims.n_a)?;
    let n_a = dims.n_a;
    let mut numeric = Vec::with_capacity(grid.n_points);
    let mut parity = Vec::with_capacity(grid.n_points);
    let mut photons: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.n_points); n_a];
    let stats = observe_schrodinger(&h, &psi0, grid, &SolverOptions::default(), |_, _, psi| {
        numeric.push(psi.population(&psi0)?);
        parity.push(full_parity(psi.as_ket().unwrap(), &basis, n_a));
        for (col, p) in photons.iter_mut().zip(psi.first_mode_distribution()) {
            col.push(p);
        }
        Ok(())
    })?;

    let g = (params.lambda * params.beta()?).norm();
    let times = grid.times();
    let analytic =
        times.iter().map(|&t| revival_probability_analytic(g, params.delta_c, t)).collect::<Result<Vec<_>>>()?;

    let ideal = build_effective_qrm(&EffectiveQRM::ideal(params.delta_c, g, 0.0), n_a)?;
    // |0⟩ ⊗ |C₊⟩ is basis index 1 of [n_a, 2]
    let (effective, eff_stats) = survival(&ideal, &QState::basis(&[n_a, 2], 1)?, grid)?;

    let max_dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let analytic_vs_effective = max_dev(&analytic, &effective);
    let numeric_vs_analytic = max_dev(&numeric, &analytic);
    let parity_dev = parity.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);

    let mut photon_cols = vec![Column::real("time", times.clone())];
    photon_cols.extend(photons.into_iter().enumerate().map(|(n, v)| Column::real(format!("n{n}"), v)));
    let table = Table::new(
        "collapse_revival",
        vec![
            Column::real("time", times.clone()),
            Column::real("p_revival_numeric", numeric.clone()),
            Column::real("p_revival_analytic", analytic),
            Column::real("p_revival_effective", effective),
            Column::real("parity", parity),
        ],
    )?;
    let mut result = ScenarioResult::new(
        "collapse_revival",
        table,
        echo(&Echo { params, dims, extra: serde_json::json!({ "grid": grid }) }),
    );
    result.companions.push(Table::new("photon_distribution", photon_cols)?);
    let at = |target: f64| -> Option<f64> { times.iter().position(|t| (t - target).abs() < 1e-9).map(|i| numeric[i]) };
    let period = 2.0 * std::f64::consts::PI / params.delta_c;
    if let Some(p) = at(period) {
        result.metrics.insert("p_numeric_at_revival".into(), p);
    }
    if let Some(p) = at(period / 2.0) {
        result.metrics.insert("p_numeric_at_collapse".into(), p);
    }
    result.metrics.insert("max_abs_analytic_vs_effective".into(), analytic_vs_effective);
    result.metrics.insert("max_abs_numeric_vs_analytic".into(), numeric_vs_analytic);
    result.metrics.insert("max_abs_parity_deviation".into(), parity_dev);
    result.metrics.insert("g".into(), g);
    result.solver = stats;
    result.solver.merge(&eff_stats);
    Ok(result)
}

/// Survival of `|0, C₊⟩` under the full Hamiltonian and under the projected
/// anisotropic Rabi model, side by side.
pub fn run_effective_validity(params: &ModelParams, dims: HilbertDims, grid: &TimeGrid) -> Result<ScenarioResult> {
    let h = build_full_hamiltonian(params, dims)?;
    let basis = cat_for(params, dims.n_b)?;
    let (full, stats) = survival(&h, &vacuum_cat(&basis, dims.n_a)?, grid)?;
    let eff = effective_qrm_params(params)?;
    let hr = build_effective_qrm(&eff, dims.n_a)?;
    let (effective, eff_stats) = survival(&hr, &QState::basis(&[dims.n_a, 2], 1)?, grid)?;
    let diff: Vec<f64> = full.iter().zip(&effective).map(|(a, b)| (a - b).abs()).collect();
    let max_diff = diff.iter().copied().fold(0.0, f64::max);
    let table = Table::new(
        "effective_validity",
        vec![
            Column::real("time", grid.times()),
            Column::real("p_full", full),
            Column::real("p_effective", effective),
            Column::real("abs_diff", diff),
        ],
    )?;
    let mut result = ScenarioResult::new(
        "effective_validity",
        table,
        echo(&Echo { params, dims, extra: serde_json::json!({ "grid": grid, "effective": eff }) }),
    );
    result.metrics.insert("max_abs_diff".into(), max_diff);
    result.solver = stats;
    result.solver.merge(&eff_stats);
    Ok(result)
}

/// Final-time survival of `|0, C₊⟩` with the error Hamiltonian
/// `δ_ω b†b + δ_P(b†² + b²)` added, for each `(δ_P, δ_ω)` pair.
///
/// Any error terms already present in `params` are ignored; the nominal run
/// has none.
pub fn run_error_robustness(
    params: &ModelParams,
    dims: HilbertDims,
    deviations: &[(f64, f64)],
    t_final: f64,
) -> Result<ScenarioResult> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter("t_final must be positive".into()));
    }
    if deviations.is_empty() {
        return Err(Error::InvalidParameter("deviation grid is empty".into()));
    }
    let nominal = ModelParams { delta_p: C64::new(0.0, 0.0), delta_omega: 0.0, ..*params };
    let h = build_full_hamiltonian(&nominal, dims)?;
    let basis = cat_for(&nominal, dims.n_b)?;
    let psi0 = vacuum_cat(&basis, dims.n_a)?;
    let grid = TimeGrid::new(0.0, t_final, 2)?;
    let (p0, mut stats) = survival(&h, &psi0, &grid)?;
    let p_nominal = p0[1];

    let runs: Vec<Result<(f64, SolverStats)>> = deviations
        .par_iter()
        .map(|&(dp, dw)| {
            let e = ModelParams { delta_p: C64::new(dp, 0.0), delta_omega: dw, ..nominal };
            let herr = build_error_hamiltonian(&e, dims)?;
            let (p, s) = survival(&(&h + &herr), &psi0, &grid)?;
            Ok((p[1], s))
        })
        .collect();
    let mut populations = Vec::with_capacity(runs.len());
    for r in runs {
        let (p, s) = r?;
        populations.push(p);
        stats.merge(&s);
    }
    let deviation: Vec<f64> = populations.iter().map(|p| (p - p_nominal).abs()).collect();
    let max_dev = deviation.iter().copied().fold(0.0, f64::max);
    let table = Table::new(
        "error_robustness",
        vec![
            Column::real("delta_P", deviations.iter().map(|d| d.0).collect()),
            Column::real("delta_omega", deviations.iter().map(|d| d.1).collect()),
            Column::real("population", populations),
            Column::real("population_nominal", vec![p_nominal; deviations.len()]),
            Column::real("deviation", deviation),
        ],
    )?;
    let mut result = ScenarioResult::new(
        "error_robustness",
        table,
        echo(&Echo {
            params: &nominal,
            dims,
            extra: serde_json::json!({ "deviations": deviations, "t_final": t_final }),
        }),
    );
    result.metrics.insert("population_nominal".into(), p_nominal);
    result.metrics.insert("max_deviation".into(), max_dev);
    result.solver = stats;
    Ok(result)
}
