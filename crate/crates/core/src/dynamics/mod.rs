//! Time evolution of kets and density matrices, and finite-time propagators.
//!
//! Both propagators use the adaptive Dormand–Prince 5(4) pair of [`rk`]. The
//! Lindblad right-hand side is evaluated with left/right matrix products on
//! the `d × d` density matrix rather than with an assembled `d² × d²`
//! superoperator; the two are algebraically identical.

pub mod reduced;
pub mod rk;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::Collapse;
use crate::qops::linalg;
use crate::qops::sparse::{adjoint_into, Csr};
use crate::qops::{QOperator, QState, StateKind, C64, ZERO};

pub use reduced::ReducedBasis;
pub use rk::{StepStats, Tolerances};

/// Norm drift above which a Schrödinger run is rejected.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Trace drift above which a Lindblad run is rejected.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;
/// Most negative eigenvalue tolerated in a propagated density matrix.
pub const POSITIVITY_LIMIT: f64 = 1e-6;

/// Uniformly spaced output times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        let grid = Self { t_start, t_end, n_points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end <= self.t_start {
            return Err(Error::InvalidParameter("time grid needs finite t_end > t_start".into()));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidParameter("time grid needs n_points ≥ 2".into()));
        }
        Ok(())
    }

    /// Sample times; the last one is exactly `t_end`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.n_points;
        let span = self.t_end - self.t_start;
        (0..n).map(|k| if k + 1 == n { self.t_end } else { self.t_start + span * k as f64 / (n - 1) as f64 }).collect()
    }
}

/// Options shared by both propagators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tolerances: Tolerances,
    /// Test each sampled density matrix for eigenvalues below −1e−6.
    pub check_positivity: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), check_positivity: true }
    }
}

/// Diagnostics of one propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub steps: StepStats,
    /// `max |‖ψ‖ − 1|` (kets) or `max |Tr ρ − 1|` (density matrices).
    pub max_norm_drift: f64,
    /// `max |ρ − ρ†|` over the samples (zero for kets).
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue of the final density matrix.
    pub final_min_eigenvalue: Option<f64>,
}

impl SolverStats {
    /// Folds the diagnostics of another run into this one.
    pub fn merge(&mut self, other: &SolverStats) {
        self.steps.accepted += other.steps.accepted;
        self.steps.rejected += other.steps.rejected;
        self.steps.rhs_evals += other.steps.rhs_evals;
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.final_min_eigenvalue = match (self.final_min_eigenvalue, other.final_min_eigenvalue) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QState>,
    pub stats: SolverStats,
}

/// `ψ(t) = e^{−iHt}ψ₀` sampled on `grid`.
pub fn evolve_schrodinger(h: &QOperator, psi0: &QState, grid: &TimeGrid) -> Result<Trajectory> {
    evolve_schrodinger_with(h, psi0, grid, &SolverOptions::default())
}

pub fn evolve_schrodinger_with(
    h: &QOperator,
    psi0: &QState,
    grid: &TimeGrid,
    options: &SolverOptions,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(grid.n_points);
    let stats = observe_schrodinger(h, psi0, grid, options, |_, _, psi| {
        states.push(psi.clone());
        Ok(())
    })?;
    Ok(Trajectory { times: grid.times(), states, stats })
}

/// Schrödinger propagation that hands each sample to `observe` instead of
/// storing it.
pub fn observe_schrodinger<O>(
    h: &QOperator,
    psi0: &QState,
    grid: &TimeGrid,
    options: &SolverOptions,
    mut observe: O,
) -> Result<SolverStats>
where
    O: FnMut(usize, f64, &QState) -> Result<()>,
{
    grid.validate()?;
    h.ensure_hermitian(crate::models::HERMITIAN_TOL)?;
    psi0.check_dims(h.dims())?;
    let psi = psi0.as_ket().ok_or_else(|| Error::InvalidParameter("Schrödinger propagation needs a ket".into()))?;
    let norm0 = psi0.norm();
    let csr = Csr::from_dense(h.matrix(), 0.0);
    let dims = h.dims().to_vec();
    let minus_i = C64::new(0.0, -1.0);
    let mut drift = 0.0f64;
    let steps = rk::integrate(
        |y, out| csr.matvec(y, minus_i, out),
        psi.as_slice().expect("contiguous ket"),
        &grid.times(),
        &options.tolerances,
        |idx, t, y| {
            let state = QState::ket_unchecked(&dims, Array1::from(y.to_vec()));
            let d = (state.norm() - norm0).abs();
            drift = drift.max(d);
            if d > NORM_DRIFT_LIMIT {
                return Err(Error::SolverAccuracy { drift: d, limit: NORM_DRIFT_LIMIT });
            }
            observe(idx, t, &state)
        },
    )?;
    Ok(SolverStats { steps, max_norm_drift: drift, ..SolverStats::default() })
}

/// Right-hand side `−i(H_eff ρ − ρ H_eff†) + Σ κ L ρ L†` on row-major ρ.
struct LindbladRhs {
    n: usize,
    heff: Csr,
    jumps: Vec<(Csr, Option<Vec<C64>>, f64)>,
    x: Vec<C64>,
    xt: Vec<C64>,
}

impl LindbladRhs {
    fn new(h: &QOperator, collapse: &[Collapse]) -> Self {
        let n = h.dim();
        let mut heff = h.matrix().clone();
        let mut jumps = Vec::new();
        for (op, rate) in collapse {
            let m = op.matrix();
            let ldl = m.t().mapv(|z| z.conj()).dot(m);
            heff.zip_mut_with(&ldl, |a, &b| *a -= b * C64::new(0.0, 0.5 * rate));
            let csr = Csr::from_dense(m, 0.0);
            let diag = csr.is_diagonal().then(|| csr.diag());
            jumps.push((csr, diag, *rate));
        }
        Self { n, heff: Csr::from_dense(&heff, 0.0), jumps, x: vec![ZERO; n * n], xt: vec![ZERO; n * n] }
    }

    fn eval(&mut self, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        self.heff.matmat(rho, &mut self.x);
        adjoint_into(n, &self.x, &mut self.xt);
        let minus_i = C64::new(0.0, -1.0);
        for ((o, x), xt) in out.iter_mut().zip(&self.x).zip(&self.xt) {
            *o = (x - xt) * minus_i;
        }
        for (op, diag, rate) in &self.jumps {
            if let Some(d) = diag {
                for i in 0..n {
                    let di = d[i] * *rate;
                    for j in 0..n {
                        out[i * n + j] += di * rho[i * n + j] * d[j].conj();
                    }
                }
            } else {
                // L ρ L† = L (L ρ)†, using ρ = ρ†
                op.matmat(rho, &mut self.x);
                adjoint_into(n, &self.x, &mut self.xt);
                op.matmat(&self.xt, &mut self.x);
                for (o, v) in out.iter_mut().zip(&self.x) {
                    *o += v * *rate;
                }
            }
        }
    }
}

/// `ρ̇ = −i[H, ρ] + Σ κ_j D[o_j]ρ` sampled on `grid`.
pub fn evolve_lindblad(h: &QOperator, collapse: &[Collapse], rho0: &QState, grid: &TimeGrid) -> Result<Trajectory> {
    evolve_lindblad_with(h, collapse, rho0, grid, &SolverOptions::default())
}

pub fn evolve_lindblad_with(
    h: &QOperator,
    collapse: &[Collapse],
    rho0: &QState,
    grid: &TimeGrid,
    options: &SolverOptions,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(grid.n_points);
    let stats = observe_lindblad(h, collapse, rho0, grid, options, |_, _, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(Trajectory { times: grid.times(), states, stats })
}

/// Lindblad propagation that hands each sample to `observe`.
pub fn observe_lindblad<O>(
    h: &QOperator,
    collapse: &[Collapse],
    rho0: &QState,
    grid: &TimeGrid,
    options: &SolverOptions,
    mut observe: O,
) -> Result<SolverStats>
where
    O: FnMut(usize, f64, &QState) -> Result<()>,
{
    grid.validate()?;
    h.ensure_hermitian(crate::models::HERMITIAN_TOL)?;
    let rho0 = match rho0.kind() {
        StateKind::Ket => rho0.to_density(),
        StateKind::Density => rho0.clone(),
    };
    rho0.check_dims(h.dims())?;
    for (op, rate) in collapse {
        op.dims()
            .eq(h.dims())
            .then_some(())
            .ok_or_else(|| Error::DimensionMismatch { left: h.dims().to_vec(), right: op.dims().to_vec() })?;
        if !(rate.is_finite() && *rate >= 0.0) {
            return Err(Error::InvalidParameter(format!("collapse rate {rate} must be ≥ 0")));
        }
    }
    let n = h.dim();
    let dims = h.dims().to_vec();
    let trace0 = rho0.trace();
    let mut rhs = LindbladRhs::new(h, collapse);
    let y0: Vec<C64> = rho0.as_density().unwrap().iter().copied().collect();
    let last = grid.n_points - 1;
    let mut stats = SolverStats::default();
    let steps = rk::integrate(
        |y, out| rhs.eval(y, out),
        &y0,
        &grid.times(),
        &options.tolerances,
        |idx, t, y| {
            let rho = Array2::from_shape_vec((n, n), y.to_vec()).expect("square");
            let state = QState::density_unchecked(&dims, rho);
            let drift = (state.trace() - trace0).abs();
            stats.max_norm_drift = stats.max_norm_drift.max(drift);
            if drift > TRACE_DRIFT_LIMIT {
                return Err(Error::SolverAccuracy { drift, limit: TRACE_DRIFT_LIMIT });
            }
            stats.max_hermiticity_error = stats.max_hermiticity_error.max(state.hermiticity_error());
            if options.check_positivity {
                let m = state.as_density().unwrap();
                if !linalg::is_positive_with_shift(m, POSITIVITY_LIMIT) {
                    return Err(Error::PositivityViolation { time: t, limit: -POSITIVITY_LIMIT });
                }
                if idx == last {
                    stats.final_min_eigenvalue = linalg::eigvalsh(m).first().copied();
                }
            }
            observe(idx, t, &state)
        },
    )?;
    stats.steps = steps;
    Ok(stats)
}

/// Exact propagation `ψ(t) = V e^{−iEt} V†ψ₀` from one diagonalization of a
/// time-independent `H`. Preferable to the integrator when the spectrum is
/// wide (large Kerr) and the state is sampled over long times.
pub fn observe_spectral<O>(h: &QOperator, psi0: &QState, grid: &TimeGrid, mut observe: O) -> Result<SolverStats>
where
    O: FnMut(usize, f64, &QState) -> Result<()>,
{
    grid.validate()?;
    h.ensure_hermitian(crate::models::HERMITIAN_TOL)?;
    psi0.check_dims(h.dims())?;
    let psi = psi0.as_ket().ok_or_else(|| Error::InvalidParameter("spectral propagation needs a ket".into()))?;
    let (energies, vecs) = h.eigh()?;
    let coeffs = vecs.t().mapv(|z| z.conj()).dot(psi);
    let norm0 = psi0.norm();
    let dims = h.dims().to_vec();
    let mut drift = 0.0f64;
    for (idx, t) in grid.times().into_iter().enumerate() {
        let rotated: Array1<C64> = coeffs.iter().zip(&energies).map(|(c, e)| c * C64::new(0.0, -e * t).exp()).collect();
        let state = QState::ket_unchecked(&dims, vecs.dot(&rotated));
        let d = (state.norm() - norm0).abs();
        drift = drift.max(d);
        if d > NORM_DRIFT_LIMIT {
            return Err(Error::SolverAccuracy { drift: d, limit: NORM_DRIFT_LIMIT });
        }
        observe(idx, t, &state)?;
    }
    Ok(SolverStats { max_norm_drift: drift, ..SolverStats::default() })
}

/// `U(t) = exp(−iHt)`.
pub fn evolution_operator(h: &QOperator, t: f64) -> Result<QOperator> {
    h.ensure_hermitian(crate::models::HERMITIAN_TOL)?;
    let u = h.expm(C64::new(0.0, -t))?;
    let dev = unitarity_error(&u);
    if dev > 1e-8 {
        return Err(Error::Numeric(format!("propagator not unitary: |U†U − 1| = {dev:e}")));
    }
    Ok(u)
}

/// `max |U†U − 1|`.
pub fn unitarity_error(u: &QOperator) -> f64 {
    let m = u.matrix();
    let p = m.t().mapv(|z| z.conj()).dot(m);
    let mut worst = 0.0f64;
    for ((i, j), z) in p.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((z - C64::new(target, 0.0)).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{annihilation, coherent_state, number, ONE};

    #[test]
    fn grid_times() {
        let g = TimeGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(TimeGrid::new(1.0, 1.0, 5).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let psi = coherent_state(C64::new(0.5, 0.2), 13).unwrap();
        let h = QOperator::zeros(&[13]);
        let traj = evolve_schrodinger(&h, &psi, &TimeGrid::new(0.0, 3.0, 4).unwrap()).unwrap();
        for s in &traj.states {
            assert_eq!(s, &psi);
        }
    }

    #[test]
    fn harmonic_rotation_of_coherent_state() {
        let dim = 40;
        let alpha = C64::new(1.5, 0.5);
        let h = number(dim).unwrap();
        let psi = coherent_state(alpha, dim).unwrap();
        let grid = TimeGrid::new(0.0, 6.0, 25).unwrap();
        let traj = evolve_schrodinger(&h, &psi, &grid).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = coherent_state(alpha * C64::new(0.0, -t).exp(), dim).unwrap();
            let f = s.overlap(&exact).unwrap().norm_sqr();
            assert!(f > 1.0 - 1e-8, "t={t}: {f}");
        }
        assert!(traj.stats.max_norm_drift < NORM_DRIFT_LIMIT);
    }

    #[test]
    fn spectral_propagation_matches_integrator() {
        let dim = 30;
        let a = annihilation(dim).unwrap();
        let n = number(dim).unwrap();
        let h = &(&n * 0.7) + &(&(&a.dagger() * &(&a.dagger() * &(&a * &a))) * -0.05);
        let h = &h + &(&(&a + &a.dagger()) * 0.3);
        let psi = coherent_state(C64::new(1.0, -0.5), dim).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 9).unwrap();
        let ode = evolve_schrodinger(&h, &psi, &grid).unwrap();
        let mut k = 0;
        observe_spectral(&h, &psi, &grid, |_, _, s| {
            assert!((s.overlap(&ode.states[k]).unwrap().norm() - 1.0).abs() < 1e-7);
            k += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(k, 9);
    }

    #[test]
    fn non_hermitian_generator_rejected() {
        let a = annihilation(4).unwrap();
        let psi = QState::basis(&[4], 1).unwrap();
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        assert!(matches!(evolve_schrodinger(&a, &psi, &g), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn photon_decay() {
        let dim = 20;
        let kappa = 0.3;
        let a = annihilation(dim).unwrap();
        let n = number(dim).unwrap();
        let rho0 = coherent_state(C64::new(1.2, 0.0), dim).unwrap().to_density();
        let n0 = rho0.expect(&n).unwrap().re;
        let grid = TimeGrid::new(0.0, 5.0, 11).unwrap();
        let traj = evolve_lindblad(&QOperator::zeros(&[dim]), &[(a, kappa)], &rho0, &grid).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let got = s.expect(&n).unwrap().re;
            let exact = n0 * (-kappa * t).exp();
            assert!((got - exact).abs() < 1e-6 * exact, "t={t}");
        }
        assert!(traj.stats.max_norm_drift < TRACE_DRIFT_LIMIT);
        assert!(traj.stats.final_min_eigenvalue.unwrap() > -POSITIVITY_LIMIT);
    }

    #[test]
    fn dephasing_kills_coherence_at_the_right_rate() {
        // D[n] on (|0⟩ + |1⟩)/√2 damps ρ₀₁ as exp(−κt/2)
        let kappa = 0.4;
        let psi = QState::normalized_ket(&[2], Array1::from(vec![ONE, ONE])).unwrap();
        let n = number(2).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 3).unwrap();
        let traj = evolve_lindblad(&QOperator::zeros(&[2]), &[(n, kappa)], &psi, &grid).unwrap();
        let rho = traj.states[2].as_density().unwrap();
        assert!((rho[[0, 1]].re - 0.5 * (-kappa).exp()).abs() < 1e-9);
    }

    #[test]
    fn closed_lindblad_matches_schrodinger() {
        let dim = 15;
        let a = annihilation(dim).unwrap();
        let h = &(&number(dim).unwrap() * 0.7) + &(&(&a + &a.dagger()) * 0.3);
        let psi = coherent_state(C64::new(0.4, -0.3), dim).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 9).unwrap();
        let ket = evolve_schrodinger(&h, &psi, &grid).unwrap();
        let rho = evolve_lindblad(&h, &[], &psi, &grid).unwrap();
        for (k, r) in ket.states.iter().zip(&rho.states) {
            let f = r.population(k).unwrap();
            assert!((f - 1.0).abs() < 1e-7);
        }
        assert!(rho.stats.max_hermiticity_error < 1e-9);
    }

    #[test]
    fn propagator_properties() {
        let dim = 10;
        let a = annihilation(dim).unwrap();
        let h = &number(dim).unwrap() + &(&(&a + &a.dagger()) * 0.5);
        let u0 = evolution_operator(&h, 0.0).unwrap();
        assert!((&u0 - &QOperator::identity(&[dim])).max_abs() < 1e-14);
        let u = evolution_operator(&h, 1.3).unwrap();
        let v = evolution_operator(&h, -1.3).unwrap();
        assert!((&(&u * &v) - &QOperator::identity(&[dim])).max_abs() < 1e-8);

        let psi = QState::basis(&[dim], 2).unwrap();
        let grid = TimeGrid::new(0.0, 1.3, 2).unwrap();
        let ode = evolve_schrodinger(&h, &psi, &grid).unwrap();
        let direct = u.apply(&psi).unwrap();
        assert!((ode.states[1].overlap(&direct).unwrap().norm() - 1.0).abs() < 1e-8);
    }
}
