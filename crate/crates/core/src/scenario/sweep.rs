//! Single runs and parameter sweeps.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::output::{write_report_json, write_series, write_trajectory_csv, RunManifest};
use super::{Scenario, ScenarioError, ScenarioFile, Scheme};
use crate::exec::{self, Execution};
use crate::report::{build_report, ContainmentReport};
use crate::sim::{run_fractional_with, run_integer_discrete, SimError, TrajectoryRecord};

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const BARRIER: i32 = 4;
    pub const DIVERGENCE: i32 = 5;
    pub const STEP_SIZE: i32 = 6;
    pub const SWEEP_FAILURES: i32 = 7;
}

/// Distance to the leader hull counted as contained in sweep verdicts.
pub const CONTAINMENT_TOL: f64 = 1e-3;

pub fn exit_code(error: &SimError) -> i32 {
    match error {
        SimError::Validation(_) | SimError::Graph(_) => exit::VALIDATION,
        SimError::Barrier { .. } => exit::BARRIER,
        SimError::Divergence { .. } => exit::DIVERGENCE,
        SimError::StepSize { .. } => exit::STEP_SIZE,
        SimError::DegenerateRow(_) | SimError::Numerics(_) => exit::FAILURE,
    }
}

/// Everything a finished (or aborted) run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scheme: Scheme,
    pub record: TrajectoryRecord,
    pub report: ContainmentReport,
    pub error: Option<SimError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(exit::OK, exit_code)
    }

    pub fn status(&self) -> String {
        self.error
            .as_ref()
            .map_or_else(|| "ok".to_string(), ToString::to_string)
    }

    /// Writes `trajectory.csv` (optional), `report.json` and the series files.
    pub fn write(
        &self,
        dir: &Path,
        scenario: &Scenario,
        trajectory: bool,
    ) -> io::Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let mut outputs = Vec::new();
        if trajectory {
            let p = dir.join("trajectory.csv");
            write_trajectory_csv(&p, &self.record, &scenario.config.topology)?;
            outputs.push(p);
        }
        let p = dir.join("report.json");
        write_report_json(&p, &self.report)?;
        outputs.push(p);
        outputs.extend(write_series(dir, &self.record, &self.report)?);
        Ok(outputs
            .iter()
            .map(|p| {
                p.file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned()
            })
            .collect())
    }
}

/// Runs the scenario with its resolved scheme and builds the report.
pub fn run_scenario(scenario: &Scenario) -> RunOutcome {
    run_scenario_with(scenario, Execution::Sequential)
}

/// As [`run_scenario`]; `mode` controls per-follower evaluation in the
/// fractional scheme.
pub fn run_scenario_with(scenario: &Scenario, mode: Execution) -> RunOutcome {
    let scheme = scenario.resolved_scheme();
    let result = match scheme {
        Scheme::Discrete => run_integer_discrete(&scenario.config),
        _ => run_fractional_with(&scenario.config, mode),
    };
    let (record, error) = match result {
        Ok(r) => (r, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    let report = build_report(&record, &scenario.config.topology, &scenario.config.params);
    RunOutcome {
        scheme,
        record,
        report,
        error,
    }
}

/// Cartesian grid over order, exponent, gain and seed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub ks: Vec<f64>,
    pub gains: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub k: f64,
    pub gain: f64,
    pub seed: u64,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    /// Points in row-major order (alpha slowest, seed fastest).
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &k in &self.ks {
                for &gain in &self.gains {
                    for &seed in &self.seeds {
                        out.push(GridPoint {
                            alpha,
                            k,
                            gain,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One line of the aggregate table. Wall-clock time lives only in the
/// per-run manifest so repeated sweeps produce identical tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: usize,
    pub scenario_id: String,
    pub alpha: f64,
    pub k: f64,
    pub gain: f64,
    pub seed: u64,
    pub config_hash: String,
    pub exit_status: i32,
    pub completed: bool,
    pub connectivity_preserved: bool,
    pub contained: bool,
    pub min_margin: f64,
    pub max_final_hull_distance: f64,
    pub max_equilibrium_residual: f64,
}

fn failed_row(run: usize, p: GridPoint, err: &ScenarioError) -> SweepRow {
    SweepRow {
        run,
        scenario_id: String::new(),
        alpha: p.alpha,
        k: p.k,
        gain: p.gain,
        seed: p.seed,
        config_hash: String::new(),
        exit_status: match err {
            ScenarioError::Io { .. } => exit::FAILURE,
            _ => exit::VALIDATION,
        },
        completed: false,
        connectivity_preserved: false,
        contained: false,
        min_margin: f64::NAN,
        max_final_hull_distance: f64::NAN,
        max_equilibrium_residual: f64::NAN,
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NAN, f64::max)
}

/// Runs every grid point, concurrently up to `jobs`. `make` produces the base
/// document for a seed; the grid's order, exponent and uniform gain are then
/// applied. With `out`, each run gets `run_<n>/` holding its report, series,
/// manifest and (if `trajectories`) the trajectory table.
pub fn sweep<F>(
    grid: &SweepGrid,
    jobs: Option<usize>,
    make: F,
    out: Option<&Path>,
    trajectories: bool,
) -> io::Result<Vec<SweepRow>>
where
    F: Fn(u64) -> Result<ScenarioFile, ScenarioError> + Sync,
{
    let points = grid.points();
    let rows = exec::with_jobs(jobs, || {
        exec::map_indexed(
            Execution::Parallel,
            points.len(),
            |run| -> io::Result<SweepRow> {
                let p = points[run];
                let started = Instant::now();
                let scenario = match make(p.seed).and_then(|mut f| {
                    f.solver.alpha = p.alpha;
                    f.controller.k = p.k;
                    f.controller.gains = vec![p.gain];
                    f.build()
                }) {
                    Ok(s) => s,
                    Err(e) => return Ok(failed_row(run, p, &e)),
                };
                let outcome = run_scenario(&scenario);
                let r = &outcome.report;
                let row = SweepRow {
                    run,
                    scenario_id: scenario.id.clone(),
                    alpha: p.alpha,
                    k: p.k,
                    gain: p.gain,
                    seed: p.seed,
                    config_hash: scenario.config_hash(),
                    exit_status: outcome.exit_code(),
                    completed: r.completed,
                    connectivity_preserved: r.connectivity_preserved,
                    contained: r.completed
                        && r.final_hull_distances.iter().all(|d| *d <= CONTAINMENT_TOL),
                    min_margin: r.min_margin_over_run,
                    max_final_hull_distance: max_of(&r.final_hull_distances),
                    max_equilibrium_residual: max_of(&r.equilibrium_residuals),
                };
                if let Some(root) = out {
                    let dir = root.join(format!("run_{run:04}"));
                    let mut outputs = outcome.write(&dir, &scenario, trajectories)?;
                    let config = dir.join("scenario.json");
                    fs::write(&config, scenario.to_file().to_json())?;
                    outputs.push("scenario.json".into());
                    outputs.push("manifest.json".into());
                    RunManifest {
                        scenario_id: scenario.id.clone(),
                        config_hash: row.config_hash.clone(),
                        outputs,
                        exit_status: row.exit_status,
                        status: outcome.status(),
                        wall_clock_seconds: started.elapsed().as_secs_f64(),
                    }
                    .write(&dir.join("manifest.json"))?;
                }
                Ok(row)
            },
        )
    });
    rows.into_iter().collect()
}

/// Aggregate table, one row per run in grid order.
pub fn write_sweep_table(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io::Error::other)?;
    for row in rows {
        w.serialize(row).map_err(io::Error::other)?;
    }
    w.flush()
}
