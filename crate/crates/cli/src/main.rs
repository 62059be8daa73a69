//! Command-line front end: every subcommand runs one experiment task from a
//! JSON config, writes its artifacts, and prints the check report. Exit
//! status: 0 when no check failed, 1 when a deterministic check failed,
//! 2 on configuration or I/O errors.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use metastable_core::experiments::{emit_report, run_experiment, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "metastable-rrg",
    version,
    about = "Metastability toolkit for long-range Ising dynamics on random regular graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo hitting times from all-minus to all-plus.
    Simulate(RunArgs),
    /// Exact energy-landscape summary: stable states and stability levels.
    Landscape(RunArgs),
    /// Reference spin-flip path with per-step energy audits.
    Paths(RunArgs),
    /// Closed-form barrier and step-count bounds for the instance.
    Bounds(RunArgs),
    /// Cross-module verification battery.
    Verify(RunArgs),
    /// Hitting-time sweep over beta with an Arrhenius fit.
    Arrhenius(RunArgs),
}

impl Command {
    fn task_name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Landscape(_) => "landscape",
            Command::Paths(_) => "paths",
            Command::Bounds(_) => "bounds",
            Command::Verify(_) => "verify",
            Command::Arrhenius(_) => "arrhenius",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Landscape(a)
            | Command::Paths(a)
            | Command::Bounds(a)
            | Command::Verify(a)
            | Command::Arrhenius(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override every task seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out_dir` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: &Command) -> anyhow::Result<bool> {
    if let Ok(threads) = std::env::var("METASTABLE_RRG_THREADS") {
        let threads: usize = threads
            .parse()
            .context("METASTABLE_RRG_THREADS must be a positive integer")?;
        // Ignore the error if a pool already exists (e.g. under a test harness).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let args = command.args();
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)
        .with_context(|| format!("parsing config {}", args.config.display()))?;
    if cfg.task.name() != command.task_name() {
        anyhow::bail!(
            "config describes task `{}` but the `{}` subcommand was invoked",
            cfg.task.name(),
            command.task_name()
        );
    }
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let manifest = run_experiment(&cfg, &out).context("running experiment")?;
    print!("{}", emit_report(&manifest));
    Ok(!manifest.failed())
}
