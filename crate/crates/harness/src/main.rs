use std::io;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use riswpt_core::channel::{build_scenario, ScenarioConfig};
use riswpt_core::oracle::grid_search;
use riswpt_core::{spmc_sca_admm, PowerConstraints, RisPhases, TxBeamformer};
use riswpt_harness::config::{load, OracleFile, SolveFile};
use riswpt_harness::output::write_results;
use riswpt_harness::{emit_results, run_sweep, run_sweep_detailed, Format, ResultRow, SweepSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "riswpt", version, about = "RIS-aided constant-envelope wireless power transfer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print a summary.
    Solve(Options),
    /// Run a sweep and write one row per (sweep value, seed).
    Sweep(Options),
    /// Compare the solver with exhaustive phase-grid search on a tiny scenario.
    Oracle(Options),
}

#[derive(clap::Args)]
struct Options {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `scenario.seed` (the first seed of a sweep).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(opts) => with_pool(&opts, || solve(&opts)),
        Command::Sweep(opts) => with_pool(&opts, || sweep(&opts)),
        Command::Oracle(opts) => with_pool(&opts, || oracle(&opts)),
    }
}

fn with_pool(opts: &Options, run: impl FnOnce() -> Result<()> + Send) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        anyhow::ensure!(jobs > 0, "--jobs must be positive");
        builder = builder.num_threads(jobs);
    }
    builder.build()?.install(run)
}

fn apply_seed(scenario: &mut ScenarioConfig, seed: Option<u64>) {
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
}

fn write_rows(rows: &[ResultRow], opts: &Options) -> Result<()> {
    match &opts.out {
        Some(path) => emit_results(rows, path, opts.format)?,
        None => write_results(rows, io::stdout().lock(), opts.format)?,
    }
    Ok(())
}

fn solve(opts: &Options) -> Result<()> {
    let mut file: SolveFile = load(&opts.config)?;
    apply_seed(&mut file.scenario, opts.seed);
    let record = run_sweep_detailed(&file.to_sweep())?
        .pop()
        .context("solve produced no result")?;
    let row = &record.row;
    eprintln!(
        "total {:.6e} W, min user {:.6e} W, feasible {}, outer iterations {}, {:.3} s",
        row.total_power_w, row.min_user_power_w, row.feasible, row.outer_iters, row.wall_time_s
    );
    if let Some(err) = &record.error {
        eprintln!("no solution: {err}");
    }
    if let Some(level) = record.min_power.first().filter(|p| **p > 0.0) {
        eprintln!("required per-user power {level:.6e} W");
    }
    write_rows(std::slice::from_ref(row), opts)
}

fn sweep(opts: &Options) -> Result<()> {
    let mut spec: SweepSpec = load(&opts.config)?;
    apply_seed(&mut spec.scenario, opts.seed);
    let rows = run_sweep(&spec)?;
    write_rows(&rows, opts)
}

#[derive(Serialize)]
struct OracleReport {
    grid_objective: f64,
    grid_alpha: Vec<f64>,
    grid_theta: Vec<f64>,
    solver_objective: f64,
    ratio: f64,
}

fn oracle(opts: &Options) -> Result<()> {
    let mut file: OracleFile = load(&opts.config)?;
    apply_seed(&mut file.scenario, opts.seed);
    let scenario = &file.scenario;
    let channels = build_scenario(scenario)?;
    let constraints = PowerConstraints::unconstrained(scenario.users);
    let grid = grid_search(&channels, &constraints, scenario.tx_power_w, &file.grid)?;
    let solved = spmc_sca_admm(
        &channels,
        &constraints,
        &TxBeamformer::uniform(scenario.antennas, scenario.tx_power_w)?,
        &RisPhases::zeros(scenario.total_elements()),
        &file.solver,
    )?;
    let report = OracleReport {
        grid_objective: grid.objective,
        grid_alpha: grid.alpha,
        grid_theta: grid.theta,
        solver_objective: solved.total_power(),
        ratio: solved.total_power() / grid.objective,
    };
    eprintln!(
        "grid {:.6e} W, solver {:.6e} W, ratio {:.4}",
        report.grid_objective, report.solver_objective, report.ratio
    );
    let json = serde_json::to_string_pretty(&report)?;
    match &opts.out {
        Some(path) => write_file(path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}
