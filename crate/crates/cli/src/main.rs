//! `containment` — batch runs and sweeps of the containment simulator.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage, 3 invalid
//! scenario, 4 barrier breach, 5 divergence, 6 step size too large, 7 sweep
//! finished with failed runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use containment::exec::{self, Execution};
use containment::scenario::{
    exit, load_scenario_file, preset, run_scenario_with, sweep, write_sweep_table, RunManifest,
    ScenarioError, ScenarioFile, Scheme, SweepGrid,
};

#[derive(Parser)]
#[command(
    name = "containment",
    version,
    about = "Containment control of fractional-order leader–follower networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory, report and plot series.
    Simulate(SimulateArgs),
    /// Run a grid over order, exponent, gain and seed.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Source {
    /// Built-in scenario (karate, karate-inside).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_name = "N")]
    record_every: Option<usize>,
    /// Truncate the fractional memory to the last N steps (changes the model).
    #[arg(long, value_name = "N")]
    memory_window: Option<usize>,
    /// Let followers start observing agents that come well within the threshold.
    #[arg(long)]
    edge_addition: bool,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Auto,
    Fractional,
    Discrete,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Auto => Scheme::Auto,
            SchemeArg::Fractional => Scheme::Fractional,
            SchemeArg::Discrete => Scheme::Discrete,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    k: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    gain: Option<Vec<f64>>,
    /// Seeds as a list (`1,5,9`) or half-open range (`0..10`).
    #[arg(long)]
    seed: Option<String>,
    /// Also write each run's trajectory table.
    #[arg(long)]
    trajectories: bool,
    #[command(flatten)]
    common: Common,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Io { .. } => exit::FAILURE,
            ScenarioError::UnknownPreset(_) => exit::USAGE,
            ScenarioError::Parse(_) | ScenarioError::Invalid(_) => exit::VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(exit::FAILURE, format!("write failed: {e}"))
    }
}

fn base_file(source: &Source, seed: Option<u64>) -> Result<ScenarioFile, ScenarioError> {
    match (&source.preset, &source.config) {
        (Some(name), _) => preset(name, seed.unwrap_or(0)),
        (None, Some(path)) => {
            let mut f = load_scenario_file(path)?;
            if let Some(s) = seed {
                f.solver.seed = s;
            }
            Ok(f)
        }
        (None, None) => unreachable!("clap requires a source"),
    }
}

fn apply_common(f: &mut ScenarioFile, c: &Common) {
    if let Some(v) = c.delta {
        f.controller.delta = v;
    }
    if let Some(v) = c.step {
        f.solver.step = v;
    }
    if let Some(v) = c.horizon {
        f.solver.horizon = v;
    }
    if let Some(v) = c.record_every {
        f.output.record_every = v;
    }
    if c.memory_window.is_some() {
        f.solver.memory_window = c.memory_window;
    }
    if c.edge_addition {
        f.solver.edge_addition = true;
    }
    if let Some(s) = c.scheme {
        f.solver.scheme = s.into();
    }
}

fn simulate(args: SimulateArgs) -> Result<i32, Failure> {
    let started = Instant::now();
    let mut file = base_file(&args.source, args.seed)?;
    if let Some(v) = args.alpha {
        file.solver.alpha = v;
    }
    if let Some(v) = args.k {
        file.controller.k = v;
    }
    if let Some(v) = args.gain {
        file.controller.gains = vec![v];
    }
    apply_common(&mut file, &args.common);
    let scenario = file.build()?;
    let mode = match args.common.jobs {
        Some(n) if n > 1 => Execution::Parallel,
        _ => Execution::Sequential,
    };
    let outcome = exec::with_jobs(args.common.jobs, || run_scenario_with(&scenario, mode));

    let dir = &args.common.out;
    let mut outputs = outcome.write(dir, &scenario, true)?;
    fs::write(dir.join("scenario.json"), scenario.to_file().to_json())?;
    outputs.extend(["scenario.json".to_string(), "manifest.json".to_string()]);
    let code = outcome.exit_code();
    RunManifest {
        scenario_id: scenario.id.clone(),
        config_hash: scenario.config_hash(),
        outputs,
        exit_status: code,
        status: outcome.status(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    }
    .write(&dir.join("manifest.json"))?;

    let r = &outcome.report;
    let worst = r.final_hull_distances.iter().copied().fold(0.0, f64::max);
    println!(
        "{} alpha={} steps={} completed={} connectivity_preserved={} min_margin={:.6e} max_final_hull_distance={:.3e}",
        scenario.id,
        scenario.config.order,
        scenario.config.steps(),
        r.completed,
        r.connectivity_preserved,
        r.min_margin_over_run,
        worst
    );
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    println!("wrote {}", dir.display());
    Ok(code)
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::new(exit::USAGE, format!("cannot parse seeds {text:?}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        return Ok((a..b).collect());
    }
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn run_sweep(args: SweepArgs) -> Result<i32, Failure> {
    let base = base_file(&args.source, None)?;
    let seeds = match &args.seed {
        Some(s) => parse_seeds(s)?,
        None => vec![base.solver.seed],
    };
    let grid = SweepGrid {
        alphas: args
            .alpha
            .clone()
            .unwrap_or_else(|| vec![base.solver.alpha]),
        ks: args.k.clone().unwrap_or_else(|| vec![base.controller.k]),
        gains: args
            .gain
            .clone()
            .unwrap_or_else(|| match base.controller.gains.split_first() {
                Some((g, rest)) if rest.iter().all(|x| x == g) => vec![*g],
                // sweeps apply one uniform gain per grid point
                _ => Vec::new(),
            }),
        seeds,
    };
    if grid.gains.is_empty() && args.gain.is_none() {
        return Err(Failure::new(
            exit::USAGE,
            "scenario has per-follower gains; pass --gain to sweep a uniform gain",
        ));
    }
    if grid.is_empty() {
        return Err(Failure::new(exit::USAGE, "sweep grid is empty"));
    }
    let make = |seed: u64| -> Result<ScenarioFile, ScenarioError> {
        let mut f = base_file(&args.source, Some(seed))?;
        apply_common(&mut f, &args.common);
        Ok(f)
    };
    let out: &Path = &args.common.out;
    fs::create_dir_all(out)?;
    let rows = sweep(&grid, args.common.jobs, make, Some(out), args.trajectories)?;
    let table = out.join("sweep.csv");
    write_sweep_table(&table, &rows)?;
    let failed = rows.iter().filter(|r| r.exit_status != exit::OK).count();
    let contained = rows.iter().filter(|r| r.contained).count();
    println!(
        "{} runs, {} failed, {} contained; table {}",
        rows.len(),
        failed,
        contained,
        table.display()
    );
    for r in rows.iter().filter(|r| r.exit_status != exit::OK) {
        eprintln!(
            "run {} (alpha={} k={} gain={} seed={}) exited with {}",
            r.run, r.alpha, r.k, r.gain, r.seed, r.exit_status
        );
    }
    Ok(if failed > 0 {
        exit::SWEEP_FAILURES
    } else {
        exit::OK
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => run_sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
