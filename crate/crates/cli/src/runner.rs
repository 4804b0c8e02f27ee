//! Dispatch of a resolved config to the simulation library.

use catqrm::experiments::{
    run_bias_report, run_collapse_revival, run_decoherence, run_effective_validity, run_error_robustness, run_spectrum,
    run_tunneling, run_xgate, run_xgate_sweep, ScenarioResult,
};
use catqrm::Result;

use crate::config::{Scenario, ScenarioConfig, Sweep};

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let p = &cfg.params;
    let grid = || cfg.grid.as_ref().expect("scenario has a time grid");
    match &cfg.sweep {
        Sweep::None => run_collapse_revival(p, cfg.dims, grid()),
        Sweep::Robustness { deviations, t_final } => {
            let mut result = run_error_robustness(p, cfg.dims, deviations, *t_final)?;
            let validity = run_effective_validity(p, cfg.dims, grid())?;
            for (k, v) in &validity.metrics {
                result.metrics.insert(format!("validity.{k}"), *v);
            }
            result.solver.merge(&validity.solver);
            let mut table = validity.table;
            table.name = "validity".into();
            result.companions.push(table);
            Ok(result)
        }
        Sweep::Tunneling { epsilons, levels } => run_tunneling(p, epsilons, cfg.dims, grid(), *levels),
        Sweep::Xgate { alpha, method, levels } => run_xgate(p, *alpha, cfg.dims, *method, *levels),
        Sweep::XgateSweep { alphas, betas, epsilon } => run_xgate_sweep(p, *epsilon, alphas, betas, cfg.dims),
        Sweep::Decoherence { code, levels } => run_decoherence(p, *code, cfg.dims, grid(), *levels),
        Sweep::Bias { alphas, betas } => run_bias_report(alphas, betas, cfg.dims),
        Sweep::Spectrum { epsilons, n_levels, model } => run_spectrum(p, epsilons, cfg.dims.n_a, *n_levels, *model),
    }
}

/// The metric shown on the summary line.
pub fn headline(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::CollapseRevival => "p_numeric_at_revival",
        Scenario::ErrorRobustness => "max_deviation",
        Scenario::Tunneling => "eps_1.peak_p_target",
        Scenario::Xgate => "fidelity",
        Scenario::XgateSweep => "max_fidelity",
        Scenario::Decoherence => "max_leakage",
        Scenario::BiasReport => "max_relative_error",
        Scenario::Spectrum => "min_gap_off_resonance",
    }
}

/// `name=value` for the headline metric, falling back to the first metric.
pub fn summary_metric(result: &ScenarioResult, scenario: Scenario) -> String {
    let key = headline(scenario);
    match result.metric(key) {
        Some(v) => format!("{key}={v:.6e}"),
        None => match result.metrics.iter().next() {
            Some((k, v)) => format!("{k}={v:.6e}"),
            None => format!("rows={}", result.table.n_rows()),
        },
    }
}
