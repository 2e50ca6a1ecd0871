//! Scenario runner CLI.
//!
//! ```text
//! weakflow run <config.json | bundled:NAME> [--out DIR] [--jobs K]
//! weakflow list [--json]
//! weakflow validate <config.json>
//! ```
//!
//! Exit codes: 0 pass/complete, 1 error, 2 verdict fail, 3 inconclusive.
//! The environment variable `WEAKFLOW_SEED` overrides the config seed.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use weakflow::scenario::{self, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "weakflow",
    version,
    about = "numerical laboratory for weak (super) Ricci flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file (or `bundled:NAME`).
    Run {
        /// Path to a config JSON, or `bundled:NAME` for a built-in scenario.
        config: String,
        /// Output directory for report.json, data.csv, manifest.json.
        #[arg(long, default_value = "weakflow-out")]
        out: PathBuf,
        /// Bound the worker-thread count.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the bundled scenarios.
    List {
        /// Machine-readable JSON output.
        #[arg(long)]
        json: bool,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

fn load_config(arg: &str) -> Result<ScenarioConfig, String> {
    if let Some(name) = arg.strip_prefix("bundled:") {
        return scenario::bundled(name)
            .ok_or_else(|| format!("unknown bundled scenario '{name}' (see `weakflow list`)"));
    }
    let text = std::fs::read_to_string(arg).map_err(|e| format!("cannot read {arg}: {e}"))?;
    scenario::parse_config(&text).map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors exit with code 1 (2 is reserved for failed verdicts)
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out, jobs } => {
            if let Some(k) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                {
                    eprintln!("error: cannot configure {k} worker threads: {e}");
                    return ExitCode::from(1);
                }
            }
            let config = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            match scenario::run_scenario_to_dir(&config, &out) {
                Ok(outcome) => {
                    for c in &outcome.criteria {
                        println!(
                            "{} {} (value {:.6e}, bound {:.6e}) {}",
                            if c.passed { "PASS" } else { "FAIL" },
                            c.name,
                            c.value,
                            c.bound,
                            c.detail
                        );
                    }
                    println!("verdict: {:?} -> {}", outcome.verdict, out.display());
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::List { json } => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&scenario::list_scenarios_json())
                        .expect("static table serializes")
                );
            } else {
                for (name, description) in scenario::list_scenarios() {
                    println!("{name:36} {description}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            match scenario::parse_config(&text) {
                Ok(c) => {
                    println!(
                        "ok: scenario '{}' (task {})",
                        c.name.as_deref().unwrap_or("unnamed"),
                        task_name(&c)
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn task_name(c: &ScenarioConfig) -> &'static str {
    use weakflow::scenario::TaskSpec::*;
    match c.task {
        ExpansionStudy { .. } => "expansion-study",
        HeatConvergence { .. } => "heat-convergence",
        ConjugateConvergence { .. } => "conjugate-convergence",
        Duality { .. } => "duality",
        Wsrf { .. } => "wsrf",
        Contraction { .. } => "contraction",
        Trace { .. } => "trace",
        Saturation { .. } => "saturation",
        WeakRicciFlow { .. } => "weak-ricci-flow",
        CrossCheck { .. } => "cross-check",
        DeterminismRerun { .. } => "determinism-rerun",
    }
}
