use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use catqrm_cli::config::{self, default_text, Request, Scenario};
use catqrm_cli::output::{summary_line, write_manifest, write_result, RunManifest, ScenarioRecord};
use catqrm_cli::runner::{run_scenario, summary_metric};
use catqrm_cli::Format;

#[derive(Parser)]
#[command(name = "catqrm", version, about = "Kerr cat qubit + cavity simulator")]
struct Cli {
    /// Print every scenario with what it reproduces and its defaults.
    #[arg(long, global = true)]
    list_scenarios: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a config file, or named scenarios on defaults.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run only this scenario (repeatable); without --config it runs on defaults.
        #[arg(long = "scenario", value_name = "NAME")]
        scenarios: Vec<String>,
        /// Override a key: `key=value` for every section, `scenario.key=value` for one.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "output")]
        output_dir: PathBuf,
        /// Overrides the per-section `format`.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Worker threads for sweeps (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn list_scenarios() {
    for s in Scenario::ALL {
        println!("{}\n  {}\n", s.name(), s.description());
        for line in default_text(s).lines().skip(1).filter(|l| !l.is_empty()) {
            println!("    {line}");
        }
        println!();
    }
}

fn run(
    config: Option<PathBuf>,
    scenarios: Vec<String>,
    overrides: Vec<String>,
    output_dir: PathBuf,
    format: Option<FormatArg>,
    threads: Option<usize>,
) -> Result<(), String> {
    let started = Instant::now();
    let text = match &config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    let scenarios = scenarios
        .iter()
        .map(|n| {
            Scenario::from_name(n).ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scenario `{n}` (expected one of {})", names.join(", "))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let request = Request { config_text: text.as_deref(), scenarios, overrides };
    let mut configs = config::build(&request).map_err(|e| match &config {
        Some(p) => format!("{}: {e}", p.display()),
        None => e.to_string(),
    })?;
    if let Some(f) = format {
        for c in &mut configs {
            c.output.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
    }
    let mut stems: Vec<&str> = configs.iter().map(|c| c.output.stem.as_str()).collect();
    stems.sort_unstable();
    if let Some(w) = stems.windows(2).find(|w| w[0] == w[1]) {
        return Err(format!("two scenarios write to the same output stem `{}`", w[0]));
    }

    if let Some(n) = threads {
        if n == 0 {
            return Err("--threads must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    std::fs::create_dir_all(&output_dir).map_err(|e| format!("{}: {e}", output_dir.display()))?;

    let mut records = Vec::new();
    for cfg in &configs {
        let t0 = Instant::now();
        let result = run_scenario(cfg).map_err(|e| format!("{}: {e}", cfg.scenario))?;
        let files = write_result(&output_dir, cfg, &result).map_err(|e| e.to_string())?;
        let seconds = t0.elapsed().as_secs_f64();
        println!("{}", summary_line(cfg.scenario.name(), &summary_metric(&result, cfg.scenario), seconds));
        records.push(ScenarioRecord {
            scenario: cfg.scenario.name().to_owned(),
            files,
            rows: result.table.n_rows(),
            wall_time_s: seconds,
            metrics: result.metrics,
            solver: result.solver,
            resolved: result.params_echo,
        });
    }
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config::echo(&configs),
        threads: rayon::current_num_threads(),
        wall_time_s: started.elapsed().as_secs_f64(),
        scenarios: records,
    };
    write_manifest(&output_dir, &manifest).map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_scenarios {
        list_scenarios();
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run { config, scenarios, overrides, output_dir, format, threads }) = cli.command else {
        eprintln!("nothing to do; try `catqrm run --config <path>` or `catqrm --list-scenarios`");
        return ExitCode::from(2);
    };
    match run(config, scenarios, overrides, output_dir, format, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
