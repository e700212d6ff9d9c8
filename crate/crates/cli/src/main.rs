//! `yardloc` command-line tool.
//!
//! Exit codes: 0 success, 1 infeasible or invalid instance, 2 I/O or usage
//! error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use yardloc::{
    count_investment_combinations, generate_instance, parse_instance, prepared, serialize_instance,
    solve, write_log, AnnealConfig, GeneratorSpec, Instance, RunReport, Scenario, SolveError,
    TcsMode, TcsSolveConfig, TrackFn, UpperMode, UpperSolveConfig,
};

#[derive(Parser)]
#[command(
    name = "yardloc",
    version,
    about = "Classification yard location-allocation solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file; prints one line per violated rule.
    Validate { file: PathBuf },
    /// Choose investments and routings.
    Solve(SolveArgs),
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Print the number of investment combinations.
    Count { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Enumerate,
    Anneal,
}

#[derive(Clone, Copy, ValueEnum)]
enum TcsArg {
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrackFnArg {
    Linear,
    Step,
}

#[derive(clap::Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "enumerate")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "exact")]
    tcs: TcsArg,
    /// Replace the instance budget.
    #[arg(long, value_name = "N")]
    budget_override: Option<f64>,
    #[arg(long, value_enum)]
    track_fn: Option<TrackFnArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Structured report destination.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Per-decision search log (JSON lines).
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    enumerate_limit: u64,
    /// Annealing steps.
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Largest number of routable pairs the exact routing solver accepts.
    #[arg(long, default_value_t = 12)]
    exact_pair_limit: usize,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 6)]
    nodes: usize,
    #[arg(long, default_value_t = 0.5)]
    potential_fraction: f64,
    #[arg(long, default_value_t = 2)]
    plans: usize,
    #[arg(long, default_value_t = 0.3)]
    demand_density: f64,
    #[arg(long, default_value_t = 1.5)]
    capacity_slack: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

enum Failure {
    Domain(String),
    Usage(String),
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Solve(args) => cmd_solve(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Count { file } => cmd_count(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("YARDLOC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("YARDLOC_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Prints warnings to stderr and fails with the error listing.
fn check_valid(inst: &Instance) -> CmdResult {
    let report = inst.validate();
    for w in report.warnings() {
        eprintln!("{w}");
    }
    if report.is_empty() {
        Ok(())
    } else {
        let lines: Vec<String> = report.errors().map(|e| e.to_string()).collect();
        Err(Failure::Domain(lines.join("\n")))
    }
}

fn cmd_validate(path: &Path) -> CmdResult {
    let inst = read_instance(path)?;
    let report = inst.validate();
    for issue in &report.issues {
        println!("{issue}");
    }
    if report.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(String::new()))
    }
}

fn cmd_count(path: &Path) -> CmdResult {
    let inst = read_instance(path)?;
    check_valid(&inst)?;
    println!(
        "{:<28} {}",
        "with no-investment plan",
        count_investment_combinations(&inst, true)
    );
    println!(
        "{:<28} {}",
        "without no-investment plan",
        count_investment_combinations(&inst, false)
    );
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> CmdResult {
    let spec = GeneratorSpec {
        node_count: args.nodes,
        potential_fraction: args.potential_fraction,
        plans_per_node: args.plans,
        demand_density: args.demand_density,
        capacity_slack: args.capacity_slack,
        seed: args.seed,
    };
    let inst = generate_instance(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    write_file(&args.out, &serialize_instance(&inst))
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let mut inst = read_instance(&args.file)?;
    if let Some(b) = args.budget_override {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Failure::Usage(format!(
                "--budget-override must be a finite non-negative number, got {b}"
            )));
        }
        inst = inst.with_budget(b);
    }
    match args.track_fn {
        Some(TrackFnArg::Linear) => inst = inst.with_track_fn(TrackFn::Linear),
        Some(TrackFnArg::Step) if !matches!(inst.economics().track_fn, TrackFn::Step { .. }) => {
            inst = inst.with_track_fn(TrackFn::step_default())
        }
        _ => {}
    }
    check_valid(&inst)?;
    let inst = prepared(&inst)
        .map_err(|e| Failure::Domain(e.to_string()))?
        .into_owned();

    let mode = match args.mode {
        ModeArg::Enumerate => UpperMode::Enumerate,
        ModeArg::Anneal => UpperMode::Anneal,
    };
    let tcs_mode = match args.tcs {
        TcsArg::Exact => TcsMode::Exact,
        TcsArg::Heuristic => TcsMode::Heuristic,
    };
    let config = UpperSolveConfig {
        mode,
        enumerate_limit: args.enumerate_limit,
        anneal: AnnealConfig {
            steps: args.steps,
            rng_seed: args.seed,
            ..Default::default()
        },
        lower: TcsSolveConfig {
            mode: tcs_mode,
            exact_pair_limit: args.exact_pair_limit,
            rng_seed: args.seed,
            ..Default::default()
        },
    };

    let started = Instant::now();
    let outcome = match solve(&inst, &config) {
        Ok(o) => o,
        Err(SolveError::NoFeasibleDecision { evaluated }) => {
            return Err(Failure::Domain(infeasible_diagnostics(
                &inst, &config, evaluated,
            )));
        }
        Err(e) => return Err(Failure::Domain(format!("error: {e}"))),
    };
    let elapsed = started.elapsed();

    let report = RunReport::new(&inst, &outcome, mode, tcs_mode, args.seed);
    if let Some(out) = &args.out {
        write_file(out, &report.render())?;
    }
    if let Some(path) = &args.log {
        let file = fs::File::create(path)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        write_log(&outcome.log, std::io::BufWriter::new(file))
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    print!("{}", report.summary());
    println!("wall time: {:.3} s", elapsed.as_secs_f64());
    Ok(())
}

fn infeasible_diagnostics(inst: &Instance, config: &UpperSolveConfig, evaluated: usize) -> String {
    let mut msg = format!(
        "error: no decision within budget admits a feasible routing ({evaluated} evaluated)"
    );
    if let Ok(plan) = yardloc::solve_tcs(&Scenario::baseline(inst), &config.lower) {
        msg.push_str("\nno-investment routing violations:");
        for v in &plan.report.violations {
            msg.push_str("\n  ");
            msg.push_str(&v.describe(inst));
        }
    }
    msg
}
