//! Numerical scenarios and the analytic references they are checked
//! against. Every `run_*` function is pure in its arguments and returns a
//! [`ScenarioResult`]; sweeps fan out over rayon and collect in grid order.

mod bias;
mod decoherence;
mod gate;
mod revival;
mod tunneling;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::Serialize;

use crate::catspace::CatBasis;
use crate::dynamics::SolverStats;
use crate::error::{Error, Result};
use crate::qops::{HilbertDims, QOperator, C64};

pub use bias::run_bias_report;
pub use decoherence::{run_decoherence, Code};
pub use gate::{
    pauli_x_target, run_xgate, run_xgate_sweep, xgate_outcome, xgate_outcome_with_levels, GateMethod, GateOutcome,
    CHANNEL_LEVELS,
};
pub use revival::{run_collapse_revival, run_effective_validity, run_error_robustness};
pub use tunneling::{run_spectrum, run_tunneling, SpectrumModel};

/// Values of one named column.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Series {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl Series {
    pub fn len(&self) -> usize {
        match self {
            Series::Real(v) => v.len(),
            Series::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub data: Series,
}

impl Column {
    pub fn real(name: impl Into<String>, data: Vec<f64>) -> Self {
        Self { name: name.into(), data: Series::Real(data) }
    }

    pub fn complex(name: impl Into<String>, data: Vec<C64>) -> Self {
        Self { name: name.into(), data: Series::Complex(data) }
    }
}

/// Equal-length named columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let name = name.into();
        if let Some(first) = columns.first() {
            let n = first.data.len();
            if let Some(bad) = columns.iter().find(|c| c.data.len() != n) {
                return Err(Error::InvalidParameter(format!(
                    "table {name}: column {} has {} rows, expected {n}",
                    bad.name,
                    bad.data.len()
                )));
            }
        }
        Ok(Self { name, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&Series> {
        self.columns.iter().find(|c| c.name == name).map(|c| &c.data)
    }

    /// Real column by name.
    pub fn real(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            Series::Real(v) => Some(v),
            Series::Complex(_) => None,
        }
    }
}

/// Output of one scenario: a main table, optional companion tables, scalar
/// metrics and the resolved inputs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub table: Table,
    pub companions: Vec<Table>,
    /// Headline numbers, keyed for stable ordering.
    pub metrics: BTreeMap<String, f64>,
    pub solver: SolverStats,
    pub params_echo: serde_json::Value,
}

impl ScenarioResult {
    pub(crate) fn new(name: &str, table: Table, params_echo: serde_json::Value) -> Self {
        Self {
            name: name.to_owned(),
            table,
            companions: Vec::new(),
            metrics: BTreeMap::new(),
            solver: SolverStats::default(),
            params_echo,
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn companion(&self, name: &str) -> Option<&Table> {
        self.companions.iter().find(|t| t.name == name)
    }
}

pub(crate) fn echo<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data serializes")
}

/// `P₊₀(t) = exp(−|γ(t)|²)` with `|γ(t)|² = 2(g/Δ)²(1 − cos Δt)`.
pub fn revival_probability_analytic(g: f64, delta_c: f64, t: f64) -> Result<f64> {
    if delta_c == 0.0 || !delta_c.is_finite() {
        return Err(Error::InvalidParameter("Delta must be nonzero and finite".into()));
    }
    let r = g / delta_c;
    Ok((-2.0 * r * r * (1.0 - (delta_c * t).cos())).exp())
}

/// Inputs of the average gate fidelity on a code space of dimension `d`.
#[derive(Debug, Clone)]
pub struct GateFidelityInput {
    pub u_actual: QOperator,
    pub u_target: QOperator,
    /// Projector `P_c` onto the code space.
    pub projector: QOperator,
    pub d: usize,
}

/// `F = [Tr(MM†) + |Tr M|²]/(d² + d)` with `M = P_c U_target† U_actual P_c`.
pub fn average_gate_fidelity(input: &GateFidelityInput) -> Result<f64> {
    let GateFidelityInput { u_actual, u_target, projector, d } = input;
    if *d < 2 {
        return Err(Error::InvalidParameter("code dimension must be ≥ 2".into()));
    }
    let dims = projector.dims();
    for op in [u_actual, u_target] {
        if op.dims() != dims {
            return Err(Error::DimensionMismatch { left: dims.to_vec(), right: op.dims().to_vec() });
        }
    }
    let rank = projector.trace().re;
    let idem = (&(projector * projector) - projector).max_abs();
    if (rank - *d as f64).abs() > 1e-8 || idem > 1e-8 {
        return Err(Error::RankMismatch { expected: *d, found: rank.round().max(0.0) as usize });
    }
    let m = projector * &(&(&u_target.dagger() * u_actual) * projector);
    let mm = m.matrix();
    let hs: f64 = mm.iter().map(|z| z.norm_sqr()).sum();
    Ok(fidelity_formula(hs, m.trace(), *d))
}

/// The same formula for an explicit `d × d` code-space matrix `M`.
pub fn code_matrix_fidelity(m: &Array2<C64>) -> Result<f64> {
    let d = m.nrows();
    if d < 2 || m.ncols() != d {
        return Err(Error::InvalidParameter("code matrix must be square with d ≥ 2".into()));
    }
    let hs: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let tr: C64 = (0..d).map(|i| m[[i, i]]).sum();
    Ok(fidelity_formula(hs, tr, d))
}

fn fidelity_formula(hs: f64, tr: C64, d: usize) -> f64 {
    let d = d as f64;
    (hs + tr.norm_sqr()) / (d * d + d)
}

/// `Π = −(−1)^{a†a} ⊗ σ_z` on the full space, with the cat-basis
/// `σ_z = |C₋⟩⟨C₋| − |C₊⟩⟨C₊|` acting on the KNR mode.
pub fn parity_operator(dims: HilbertDims, basis: &CatBasis) -> Result<QOperator> {
    let dims = HilbertDims::new(dims.n_a, dims.n_b)?;
    if basis.dim_b() != dims.n_b {
        return Err(Error::DimensionMismatch { left: vec![dims.n_b], right: vec![basis.dim_b()] });
    }
    let w = basis.isometry();
    let z = pauli_z_on(w);
    Ok(cavity_parity(dims.n_a).tensor(&QOperator::new(&[dims.n_b], z)?))
}

/// `W σ_z W†` for an isometry with columns `|C₋⟩`, `|C₊⟩`.
fn pauli_z_on(w: &Array2<C64>) -> Array2<C64> {
    let n = w.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| w[[i, 0]] * w[[j, 0]].conj() - w[[i, 1]] * w[[j, 1]].conj())
}

/// `Π` on the effective `[n_a, 2]` space.
pub fn effective_parity_operator(n_a: usize) -> Result<QOperator> {
    if n_a < 2 {
        return Err(Error::InvalidDimension { dim: n_a, min: 2 });
    }
    Ok(cavity_parity(n_a).tensor(&crate::models::pauli::sigma_z()))
}

/// `−(−1)^{a†a}`.
fn cavity_parity(n_a: usize) -> QOperator {
    let diag: Vec<C64> = (0..n_a).map(|n| C64::new(if n % 2 == 0 { -1.0 } else { 1.0 }, 0.0)).collect();
    QOperator::diagonal(&[n_a], &diag)
}

/// Index of the first local maximum reaching `frac` of the global maximum.
pub(crate) fn first_major_peak(values: &[f64], frac: f64) -> Option<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let n = values.len();
    (0..n).find(|&i| {
        let left = i == 0 || values[i - 1] <= values[i];
        let right = i + 1 == n || values[i + 1] <= values[i];
        left && right && values[i] >= frac * max
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catspace::cat_basis;
    use crate::qops::{QState, ZERO};
    use std::f64::consts::PI;

    #[test]
    fn revival_formula_limits() {
        for k in 0..4 {
            let p = revival_probability_analytic(2.0, 1.0, 2.0 * PI * k as f64).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
        let deep = revival_probability_analytic(2.0, 1.0, PI).unwrap();
        assert!((deep - (-16f64).exp()).abs() < 1e-20);
        assert!((deep - 1.1253517e-7).abs() < 1e-13);
        assert_eq!(revival_probability_analytic(0.0, 1.0, 0.7).unwrap(), 1.0);
        assert!(revival_probability_analytic(1.0, 0.0, 1.0).is_err());
    }

    fn code_projector() -> QOperator {
        QOperator::diagonal(&[3], &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO])
    }

    #[test]
    fn fidelity_reference_values() {
        let id = QOperator::identity(&[3]);
        let input =
            |u: QOperator| GateFidelityInput { u_actual: u, u_target: id.clone(), projector: code_projector(), d: 2 };
        assert!((average_gate_fidelity(&input(id.clone())).unwrap() - 1.0).abs() < 1e-15);
        let phase = QOperator::diagonal(&[3], &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0), ZERO]);
        assert!((average_gate_fidelity(&input(phase)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // everything leaks into the third level
        let mut swap = Array2::zeros((3, 3));
        swap[[2, 0]] = C64::new(1.0, 0.0);
        swap[[2, 1]] = C64::new(1.0, 0.0);
        let leak = QOperator::new(&[3], swap).unwrap();
        assert_eq!(average_gate_fidelity(&input(leak)).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_rejects_wrong_rank() {
        let id = QOperator::identity(&[3]);
        let bad = GateFidelityInput { u_actual: id.clone(), u_target: id.clone(), projector: id, d: 2 };
        assert_eq!(average_gate_fidelity(&bad), Err(Error::RankMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn code_matrix_matches_full_formula() {
        let m = Array2::from_shape_vec(
            (2, 2),
            vec![C64::new(0.6, 0.1), C64::new(0.0, 0.3), C64::new(-0.2, 0.0), C64::new(0.5, -0.4)],
        )
        .unwrap();
        let mut full = Array2::zeros((3, 3));
        full.slice_mut(ndarray::s![..2, ..2]).assign(&m);
        let u = QOperator::new(&[3], full).unwrap();
        let input =
            GateFidelityInput { u_actual: u, u_target: QOperator::identity(&[3]), projector: code_projector(), d: 2 };
        let a = average_gate_fidelity(&input).unwrap();
        let b = code_matrix_fidelity(&m).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn parity_eigenstates() {
        let n_b = 30;
        let cats = cat_basis(C64::new(2.0, 0.0), n_b).unwrap();
        let dims = HilbertDims::new(4, n_b).unwrap();
        let pi = parity_operator(dims, &cats).unwrap();
        let zero_plus = QState::basis(&[4], 0).unwrap().tensor(cats.c_plus());
        let one_plus = QState::basis(&[4], 1).unwrap().tensor(cats.c_plus());
        assert!((pi.expect_in(&zero_plus) - 1.0).abs() < 1e-12);
        assert!((pi.expect_in(&one_plus) + 1.0).abs() < 1e-12);

        let eff = effective_parity_operator(5).unwrap();
        let sq = &eff * &eff;
        assert!((&sq - &QOperator::identity(&[5, 2])).max_abs() < 1e-10);
        // projected Π² is the projector onto the cat manifold
        let p2 = &pi * &pi;
        let proj = crate::models::on_b(&cats.projector(), 4);
        assert!((&p2 - &proj).max_abs() < 1e-10);
    }

    #[test]
    fn table_rejects_ragged_columns() {
        let ok = Table::new("t", vec![Column::real("a", vec![1.0]), Column::real("b", vec![2.0])]);
        assert_eq!(ok.unwrap().n_rows(), 1);
        let bad = Table::new("t", vec![Column::real("a", vec![1.0]), Column::real("b", vec![])]);
        assert!(bad.is_err());
    }

    #[test]
    fn peak_finder_skips_small_bumps() {
        let v = [0.0, 0.2, 0.1, 0.5, 0.95, 0.9, 1.0, 0.2];
        assert_eq!(first_major_peak(&v, 0.9), Some(4));
    }

    trait ExpectIn {
        fn expect_in(&self, s: &QState) -> f64;
    }

    impl ExpectIn for QOperator {
        fn expect_in(&self, s: &QState) -> f64 {
            s.expect(self).unwrap().re
        }
    }
}
