use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use ecosim::config::{parse_config, ScenarioConfig};
use ecosim::harness::{aggregate, run_replication, Replication};
use ecosim::output::{write_run_outputs, RunSummary, SeedSummary};
use ecosim::verify::all_suites;

#[derive(Parser)]
#[command(name = "ecosim", version, about = "Habitat-network ecosystem simulator with a budget-matched registry baseline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (flat `key = value` lines, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single key, e.g. `--set users=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Replication seed; repeatable, replaces the configured seed list.
    #[arg(long = "seed", value_name = "N")]
    seed: Vec<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment for every seed and write CSVs plus a summary.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Replications to run concurrently (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the built-in oracle and property suites at reduced sizes.
    Verify,
    /// Print the fully resolved configuration.
    PrintConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn resolve_config(args: &ConfigArgs) -> Result<ScenarioConfig, String> {
    let mut overrides = Vec::new();
    for assignment in &args.set {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(format!("--set expects KEY=VALUE, got `{assignment}`"));
        };
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    let mut cfg =
        parse_config(args.config.as_deref(), &overrides).map_err(|e| e.to_string())?;
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    Ok(cfg)
}

fn cmd_run(cfg: &ScenarioConfig, out: &PathBuf, workers: Option<usize>) -> Result<(), String> {
    let worker_count = workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1)
        .min(cfg.seeds.len());

    let seeds = cfg.seeds.clone();
    let replications: Vec<(u64, Replication)> = {
        let results: Mutex<Vec<Option<Replication>>> =
            Mutex::new((0..seeds.len()).map(|_| None).collect());
        let next: Mutex<usize> = Mutex::new(0);
        std::thread::scope(|scope| {
            for _ in 0..worker_count {
                scope.spawn(|| loop {
                    let index = {
                        let mut guard = next.lock().unwrap();
                        let i = *guard;
                        if i >= seeds.len() {
                            break;
                        }
                        *guard += 1;
                        i
                    };
                    let replication = run_replication(cfg, seeds[index]);
                    results.lock().unwrap()[index] = Some(replication);
                });
            }
        });
        seeds
            .iter()
            .zip(results.into_inner().unwrap())
            .map(|(&seed, r)| (seed, r.expect("every replication completes")))
            .collect()
    };

    let per_seed_records: Vec<(u64, Vec<ecosim::harness::StepRecord>)> = replications
        .iter()
        .map(|(seed, r)| (*seed, r.records.clone()))
        .collect();
    let pooled: Vec<ecosim::harness::StepRecord> = per_seed_records
        .iter()
        .flat_map(|(_, records)| records.iter().cloned())
        .collect();
    let pooled_aggregate = aggregate(&pooled, cfg.window);

    let per_seed: Vec<SeedSummary> = replications
        .iter()
        .map(|(seed, r)| SeedSummary {
            seed: *seed,
            crossover_window: aggregate(&r.records, cfg.window).crossover_window,
            final_clustering_coefficient: r.final_clustering,
        })
        .collect();
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        window: cfg.window,
        crossover_window: pooled_aggregate.crossover_window,
        per_seed,
    };

    write_run_outputs(out, cfg, &per_seed_records, &pooled_aggregate, &summary)
        .map_err(|e| format!("cannot write outputs to {}: {e}", out.display()))?;
    println!(
        "wrote {} seed file(s), aggregate.csv, summary.json, config.txt to {}",
        per_seed_records.len(),
        out.display()
    );
    if let Some(window) = pooled_aggregate.crossover_window {
        println!("crossover window: {window}");
    } else {
        println!("crossover window: none");
    }
    Ok(())
}

fn cmd_verify() -> ExitCode {
    let mut failures = Vec::new();
    for suite in all_suites() {
        let status = if suite.passed { "pass" } else { "FAIL" };
        println!("{}: {} ({})", suite.name, status, suite.detail);
        if !suite.passed {
            failures.push(suite.name);
        }
    }
    if failures.is_empty() {
        println!("all suites passed");
        ExitCode::SUCCESS
    } else {
        eprintln!("failing suites: {}", failures.join(", "));
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
        } => {
            let cfg = match resolve_config(&config) {
                Ok(cfg) => cfg,
                Err(message) => {
                    eprintln!("error: {message}");
                    return ExitCode::FAILURE;
                }
            };
            match cmd_run(&cfg, &out, workers) {
                Ok(()) => ExitCode::SUCCESS,
                Err(message) => {
                    eprintln!("error: {message}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify => cmd_verify(),
        Command::PrintConfig { config } => match resolve_config(&config) {
            Ok(cfg) => {
                print!("{}", cfg.to_config_text());
                ExitCode::SUCCESS
            }
            Err(message) => {
                eprintln!("error: {message}");
                ExitCode::FAILURE
            }
        },
    }
}
