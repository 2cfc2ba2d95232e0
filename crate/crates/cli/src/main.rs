//! metriflow: run structure-preserving flow experiments from TOML configs.
//!
//! Exit codes: 0 success, 1 failed report checks, 2 bad input (unknown
//! preset, malformed config), 3 runtime failure (solver abort, io).

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::Context;
use clap::{Parser, Subcommand};

use metriflow_core::harness::{preset_catalog, CheckResult, RunSummary};
use metriflow_core::{run_experiment, ExperimentConfig, HarnessError, TrajectoryDoc};

#[derive(Parser)]
#[command(
    name = "metriflow",
    version,
    about = "Structure-preserving simulation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment configs (each on its own thread).
    Run {
        /// TOML config files.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Override the final time for every run.
        #[arg(long)]
        t_max: Option<f64>,
        /// Override the step size for every run.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the random seed for every run's initial data.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to METRIFLOW_OUT_DIR, then the
        /// working directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the preset catalog.
    List,
    /// Re-evaluate the checks stored in a trajectory JSON; exits 1 on FAIL.
    Report {
        /// Trajectory document written by `run`.
        trajectory: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            configs,
            t_max,
            dt,
            seed,
            out,
        } => cmd_run(&configs, t_max, dt, seed, out),
        Command::List => cmd_list(),
        Command::Report { trajectory } => cmd_report(&trajectory),
    }
}

fn cmd_list() -> ExitCode {
    for (tag, summary) in preset_catalog() {
        println!("{tag:<24} {summary}");
    }
    ExitCode::SUCCESS
}

fn load_config(
    path: &Path,
    t_max: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))?;
    if t_max.is_some() {
        cfg.integrator.t_max = t_max;
    }
    if dt.is_some() {
        cfg.integrator.dt = dt;
    }
    if seed.is_some() {
        cfg.initial.seed = seed;
    }
    Ok(cfg)
}

fn print_check(check: &CheckResult) {
    let verdict = if check.passed { "PASS" } else { "FAIL" };
    println!("   {verdict} {} ({})", check.description, check.detail);
}

fn print_summary(config_path: &Path, summary: &RunSummary) {
    println!(
        "== {} [{}]: {} records to t = {:.6e} ({}, {} steps, {} rejected)",
        summary.preset,
        config_path.display(),
        summary.records,
        summary.final_time,
        summary.method,
        summary.steps,
        summary.rejected_steps,
    );
    if let Some(csv) = &summary.csv {
        println!("   csv:  {}", csv.display());
    }
    if let Some(json) = &summary.json {
        println!("   json: {}", json.display());
    }
    for check in &summary.checks {
        print_check(check);
    }
}

fn cmd_run(
    configs: &[PathBuf],
    t_max: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> ExitCode {
    let out_dir = out
        .or_else(|| env::var_os("METRIFLOW_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let mut jobs = Vec::new();
    for path in configs {
        match load_config(path, t_max, dt, seed) {
            Ok(cfg) => jobs.push((path.clone(), cfg)),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        }
    }

    let results: Vec<(PathBuf, Result<RunSummary, HarnessError>)> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(path, cfg)| {
                let out_dir = &out_dir;
                scope.spawn(move || {
                    let result = run_experiment(&cfg, out_dir);
                    (path, result)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("runner thread panicked"))
            .collect()
    });

    let mut exit = 0u8;
    for (path, result) in &results {
        match result {
            Ok(summary) => print_summary(path, summary),
            Err(e) => {
                eprintln!("error [{}]: {e}", path.display());
                exit = exit.max(e.exit_code() as u8);
            }
        }
    }
    ExitCode::from(exit)
}

fn cmd_report(trajectory: &Path) -> ExitCode {
    let doc = match TrajectoryDoc::load_json(trajectory) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    println!(
        "{} via {} to t = {:.6e} ({} records)",
        doc.meta.preset,
        doc.meta.method,
        doc.meta.final_time,
        doc.times.len()
    );
    let results = doc.evaluate();
    if results.is_empty() {
        println!("   no checks attached");
        return ExitCode::SUCCESS;
    }
    let mut failed = false;
    for check in &results {
        print_check(check);
        failed |= !check.passed;
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
