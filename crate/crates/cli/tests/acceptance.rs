//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use catqrm::catspace::displaced_fock_overlap;
use catqrm::dynamics::{observe_lindblad, observe_schrodinger, SolverOptions, SolverStats, TimeGrid};
use catqrm::experiments::{xgate_outcome, GateMethod, ScenarioResult};
use catqrm::models::{build_full_hamiltonian, ModelParams};
use catqrm::qops::{displacement_operator, HilbertDims, QState, C64};
use catqrm_cli::runner::run_scenario;
use catqrm_cli::{parse_config, ScenarioConfig};

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Check {
    Check { ok, detail }
}

fn config(text: &str) -> ScenarioConfig {
    parse_config(text).expect("valid config").remove(0)
}

fn run(text: &str) -> ScenarioResult {
    run_scenario(&config(text)).expect("scenario runs")
}

fn metric(r: &ScenarioResult, key: &str) -> f64 {
    r.metric(key).unwrap_or_else(|| panic!("{} has no metric {key}", r.name))
}

/// Diagnostics gathered across criteria for the solver-property check.
#[derive(Default)]
struct Ledger {
    kets: SolverStats,
    densities: SolverStats,
}

fn within_time(t0: Instant, limit_s: f64) -> Check {
    let s = t0.elapsed().as_secs_f64();
    check(s <= limit_s, format!("runtime {s:.1} s (limit {limit_s} s)"))
}

fn effective_validity(l: &mut Ledger) -> Vec<Check> {
    let t0 = Instant::now();
    let r = run("[error_robustness]\nbeta = 2.0\nK = 10.0\nlambda = 1.0\ndelta = 0.1\nn_a = 30\nn_b = 30\n\
                 deviations = [[0.0, 0.0]]\n");
    l.kets.merge(&r.solver);
    let d = metric(&r, "validity.max_abs_diff");
    vec![check(d < 0.02, format!("max |P_full - P_R| over [0, 4pi] = {d:.4} (limit 0.02)")), within_time(t0, 60.0)]
}

fn error_suppression(l: &mut Ledger) -> Vec<Check> {
    let t0 = Instant::now();
    let r = run("[error_robustness]\nbeta = 2.0\nK = 10.0\nlambda = 1.0\ndelta = 0.1\nn_a = 30\nn_b = 30\n\
                 deviations = [[0.1, 0.1], [-0.1, -0.1]]\nn_points = 2\n");
    l.kets.merge(&r.solver);
    let dev = r.table.real("deviation").unwrap();
    let per_point = t0.elapsed().as_secs_f64() / dev.len() as f64;
    vec![
        check(dev[0] < 0.005, format!("deviation at +0.1 = {:.5}", dev[0])),
        check(dev[1] < 0.005, format!("deviation at -0.1 = {:.5} (limit 0.005)", dev[1])),
        check(per_point <= 120.0, format!("{per_point:.1} s per grid point (limit 120 s)")),
    ]
}

fn collapse_revival(l: &mut Ledger) -> Vec<Check> {
    let t0 = Instant::now();
    let r = run("[collapse_revival]\n");
    l.kets.merge(&r.solver);
    let revival = metric(&r, "p_numeric_at_revival");
    let collapse = metric(&r, "p_numeric_at_collapse");
    let analytic = metric(&r, "max_abs_analytic_vs_effective");
    vec![
        check(revival >= 0.95, format!("P(2pi) = {revival:.4} (>= 0.95)")),
        check(collapse <= 1e-3, format!("P(pi) = {collapse:.2e} (<= 1e-3)")),
        check(analytic <= 1e-2, format!("analytic vs ideal Rabi {analytic:.1e} (<= 1e-2)")),
        within_time(t0, 60.0),
    ]
}

fn tunneling(l: &mut Ledger) -> Vec<Check> {
    let t0 = Instant::now();
    let spectrum = run("[spectrum]\nepsilons = [0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, \
                        0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 1.0, 2.0, 3.0]\n");
    let mut out = Vec::new();
    for n in 1..=3 {
        let g = metric(&spectrum, &format!("gap_at_eps_{n}"));
        out.push(check(g < 1e-3, format!("gap at eps={n}: {g:.1e}")));
    }
    let off = metric(&spectrum, "min_gap_off_resonance");
    out.push(check(off > 5e-2, format!("min gap on [0.1, 0.9]: {off:.3}")));

    let r = run("[tunneling]\nepsilons = [0.75, 1.0]\n");
    l.kets.merge(&r.solver);
    let peak = metric(&r, "eps_1.peak_p_target");
    out.push(check(peak > 0.9, format!("peak P(|1-,-x>) = {peak:.4}")));
    let observed = metric(&r, "eps_1.transfer_time");
    let predicted = metric(&r, "eps_1.predicted_transfer_time");
    let ratio = observed / predicted;
    out.push(check(
        (ratio - 1.0).abs() <= 0.15,
        format!("transfer time {observed:.1} vs two-level {predicted:.1} (ratio {ratio:.3}, tolerance 15%)"),
    ));
    let stay = metric(&r, "eps_0.75.min_p_initial");
    out.push(check(stay > 0.8, format!("eps=0.75 min P(initial) = {stay:.3}")));
    out.push(within_time(t0, 600.0));
    out
}

fn bias_identity() -> Vec<Check> {
    let t0 = Instant::now();
    let r = run("[bias_report]\n");
    let e = metric(&r, "max_relative_error");
    vec![check(e < 1e-6, format!("max relative error {e:.2e} over 16 (alpha, beta) pairs")), within_time(t0, 30.0)]
}

fn xgate(l: &mut Ledger) -> Vec<Check> {
    let nominal = run("[xgate]\n");
    l.kets.merge(&nominal.solver);
    let f = metric(&nominal, "fidelity");
    let mut out = vec![check(f >= 0.995, format!("F_X = {f:.5}"))];
    for s in [0.5, -0.5] {
        let r = run(&format!("[xgate]\ndelta_P = {s}\ndelta_omega = {s}\n"));
        l.kets.merge(&r.solver);
        let inc = metric(&r, "infidelity_increase");
        out.push(check(inc <= 0.002, format!("errors {s:+}: infidelity +{inc:.5} (<= 0.002)")));
    }

    let t1 = Instant::now();
    let sweep = config("[xgate_sweep]\n");
    let mut fids = Vec::new();
    for a in [1.0, 1.25, 1.5, 1.75, 2.0] {
        let p = ModelParams {
            lambda: C64::new(1.0, 0.0),
            omega: 0.5 / (4.0 * a),
            ..sweep.params.with_beta(C64::new(a, 0.0))
        };
        let o = xgate_outcome(&p, C64::new(a, 0.0), sweep.dims, GateMethod::Ode).expect("gate runs");
        l.kets.merge(&o.stats);
        fids.push(o.fidelity);
    }
    let worst = fids.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    out.push(check(worst >= -1e-3, format!("diagonal F_X {fids:.4?}, smallest step {worst:+.1e}")));
    let s = t1.elapsed().as_secs_f64();
    out.push(check(s <= 300.0, format!("diagonal sweep {s:.1} s (limit 300 s)")));
    out
}

fn decoherence(l: &mut Ledger) -> Vec<Check> {
    let t0 = Instant::now();
    let base = "[decoherence]\nkappa_a = 0.0\nkappa_b = 0.0\n";
    let loss = run("[decoherence]\nkappa_a = 0.01\nkappa_b = 0.01\n");
    let deph = run(&format!("{base}kappa_phi_a = 0.005\nkappa_phi_b = 0.005\n"));
    let deph2 = run(&format!("{base}kappa_phi_a = 0.01\nkappa_phi_b = 0.01\n"));
    for r in [&loss, &deph, &deph2] {
        l.densities.merge(&r.solver);
    }
    let lo = metric(&loss, "max_leakage");
    let d1 = metric(&deph, "final_leakage");
    let d2 = metric(&deph2, "final_leakage");
    vec![
        check(lo < 1e-3, format!("loss-only max leakage {lo:.2e} (< 1e-3)")),
        check((d1 - 0.005).abs() <= 0.002, format!("dephasing 0.005 end leakage {d1:.4} (0.005 +- 0.002)")),
        check((d2 / d1 - 4.0).abs() <= 1.2, format!("doubling ratio {:.2} (4 +- 30%)", d2 / d1)),
        within_time(t0, 900.0),
    ]
}

fn solver_properties(l: &Ledger) -> Vec<Check> {
    let mut out = vec![
        check(l.kets.max_norm_drift < 1e-6, format!("ket norm drift {:.1e}", l.kets.max_norm_drift)),
        check(l.densities.max_norm_drift < 1e-8, format!("trace drift {:.1e}", l.densities.max_norm_drift)),
        check(
            l.densities.max_hermiticity_error < 1e-9,
            format!("hermiticity {:.1e}", l.densities.max_hermiticity_error),
        ),
    ];
    let min_eig = l.densities.final_min_eigenvalue.unwrap_or(f64::NAN);
    out.push(check(min_eig >= -1e-6, format!("min eigenvalue {min_eig:.1e}")));

    // closed-system Lindblad against the pure-state trajectory
    let p =
        ModelParams { lambda: C64::new(0.3, 0.0), delta: 0.05, ..ModelParams::default() }.with_beta(C64::new(1.0, 0.0));
    let dims = HilbertDims::new(12, 16).unwrap();
    let h = build_full_hamiltonian(&p, dims).unwrap();
    let psi0 = QState::basis(&[12, 16], 1).unwrap();
    let grid = TimeGrid::new(0.0, 2.0, 5).unwrap();
    let mut kets = Vec::new();
    observe_schrodinger(&h, &psi0, &grid, &SolverOptions::default(), |_, _, s| {
        kets.push(s.clone());
        Ok(())
    })
    .unwrap();
    let mut infidelity = 0.0f64;
    let mut k = 0;
    observe_lindblad(&h, &[], &psi0, &grid, &SolverOptions::default(), |_, _, rho| {
        infidelity = infidelity.max((1.0 - rho.population(&kets[k])?).abs());
        k += 1;
        Ok(())
    })
    .unwrap();
    out.push(check(infidelity < 1e-7, format!("closed Lindblad vs Schrodinger infidelity {infidelity:.1e}")));

    let mut fc = 0.0f64;
    for z in [C64::new(0.5, 0.0), C64::new(-1.2, 0.7), C64::new(1.7, -1.8), C64::new(0.0, 2.5)] {
        let d = displacement_operator(z, 90).unwrap();
        for m in 0..=10 {
            for n in 0..=10 {
                fc = fc.max((d.matrix()[[m, n]] - displaced_fock_overlap(m, n, z)).norm());
            }
        }
    }
    out.push(check(fc < 1e-8, format!("Franck-Condon closed form vs expm {fc:.1e}")));
    out
}

fn determinism() -> Vec<Check> {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[xgate_sweep]\nalphas = [1.0, 1.5]\nbetas = [1.0, 1.5]\nn_a = 20\nn_b = 20\n\n\
         [tunneling]\nepsilons = [0.5, 1.0, 2.0]\nt_end = 30.0\nn_points = 31\n\n\
         [bias_report]\n",
    )
    .unwrap();
    let read = |dir: &Path| {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.json")
            .map(|p| (p.display().to_string(), std::fs::read(&p).unwrap()))
            .map(|(n, b)| (n.rsplit('/').next().unwrap().to_owned(), b))
            .collect();
        files.sort();
        files
    };
    let mut outputs = Vec::new();
    for threads in ["1", "2", "4", "1"] {
        let out = tmp.path().join(format!("out{}", outputs.len()));
        let status = Command::new(env!("CARGO_BIN_EXE_catqrm"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--threads", threads, "--output-dir"])
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return vec![check(false, String::from_utf8_lossy(&status.stderr).into_owned())];
        }
        outputs.push(read(&out));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    vec![check(
        same && outputs[0].len() == 3,
        format!("{} files identical over threads 1, 2, 4 and a rerun", outputs[0].len()),
    )]
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, checks: Vec<Check>| {
        let ok = checks.iter().all(|c| c.ok);
        let details: Vec<String> =
            checks.iter().map(|c| if c.ok { c.detail.clone() } else { format!("[x] {}", c.detail) }).collect();
        println!("{} {n}. {name}: {}", if ok { "PASS" } else { "FAIL" }, details.join("; "));
        if !ok {
            failed += 1;
        }
    };
    report(1, "effective-model validity", effective_validity(&mut ledger));
    report(2, "error suppression", error_suppression(&mut ledger));
    report(3, "collapse and revival", collapse_revival(&mut ledger));
    report(4, "level crossings and tunneling", tunneling(&mut ledger));
    report(5, "bias-parameter identity", bias_identity());
    report(6, "Pauli-X gate", xgate(&mut ledger));
    report(7, "decoherence", decoherence(&mut ledger));
    report(8, "solver properties", solver_properties(&ledger));
    report(9, "determinism", determinism());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
