//! Bias-preservation gaps of the single-cat and pair-cat codes.

use rayon::prelude::*;

use super::{echo, Column, ScenarioResult, Table};
use crate::catspace::{bias_report, cat_basis, pair_cat_basis, BiasReport};
use crate::error::{Error, Result};
use crate::qops::{HilbertDims, C64};

/// Dephasing and flip gaps of both codes over an `(α, β)` grid (α-major),
/// together with the relative deviation of each pair gap from
/// `e^{−2|α|²}` times its single-cat counterpart.
pub fn run_bias_report(alphas: &[f64], betas: &[f64], dims: HilbertDims) -> Result<ScenarioResult> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidParameter("bias grids must be nonempty".into()));
    }
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let reports: Vec<Result<BiasReport>> = points
        .par_iter()
        .map(|&(a, b)| {
            let beta = C64::new(b, 0.0);
            let pair = pair_cat_basis(C64::new(a, 0.0), beta, dims)?;
            bias_report(&pair, &cat_basis(beta, dims.n_b)?)
        })
        .collect();
    let mut cols: Vec<Vec<C64>> = (0..4).map(|_| Vec::with_capacity(points.len())).collect();
    let mut suppression = Vec::with_capacity(points.len());
    let mut dephasing_err = Vec::with_capacity(points.len());
    let mut flip_err = Vec::with_capacity(points.len());
    for (&(a, _), r) in points.iter().zip(reports) {
        let r = r?;
        let s = (-2.0 * a * a).exp();
        let rel = |pair: C64, single: C64| (pair - single * s).norm() / (single * s).norm();
        dephasing_err.push(rel(r.pair_dephasing_gap, r.single_dephasing_gap));
        flip_err.push(rel(r.pair_flip_gap, r.single_flip_gap));
        suppression.push(s);
        for (col, v) in
            cols.iter_mut().zip([r.pair_dephasing_gap, r.pair_flip_gap, r.single_dephasing_gap, r.single_flip_gap])
        {
            col.push(v);
        }
    }
    let max_err = dephasing_err.iter().chain(&flip_err).copied().fold(0.0, f64::max);
    let names = ["pair_dephasing_gap", "pair_flip_gap", "single_dephasing_gap", "single_flip_gap"];
    let mut columns = vec![
        Column::real("alpha", points.iter().map(|p| p.0).collect()),
        Column::real("beta", points.iter().map(|p| p.1).collect()),
    ];
    columns.extend(names.iter().zip(cols).map(|(n, v)| Column::complex(*n, v)));
    columns.push(Column::real("suppression", suppression));
    columns.push(Column::real("dephasing_relative_error", dephasing_err));
    columns.push(Column::real("flip_relative_error", flip_err));
    let mut result = ScenarioResult::new(
        "bias_report",
        Table::new("bias_report", columns)?,
        echo(&serde_json::json!({ "alphas": alphas, "betas": betas, "dims": dims })),
    );
    result.metrics.insert("max_relative_error".into(), max_err);
    Ok(result)
}
