//! Scenario files, presets, output writers and parameter sweeps.
//!
//! A scenario is one JSON document:
//!
//! ```json
//! {
//!   "id": "demo",
//!   "agents": [{"id": 1, "role": "follower", "state": [0.4, 0.3]},
//!              {"id": 2, "role": "leader", "state": [0.0, 0.0]}],
//!   "edges": [{"from": 1, "to": 2}],
//!   "controller": {"k": 2.0, "gains": [1.0], "delta": 1.0},
//!   "solver": {"alpha": 0.8, "step": 0.001, "horizon": 50.0},
//!   "output": {"record_every": 1}
//! }
//! ```
//!
//! Agent ids are one-based and must follow listing order. An edge `from -> to`
//! means agent `from` observes (and is pulled towards) agent `to`.

mod output;
mod preset;
mod sweep;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controller::ControllerParams;
use crate::frac::FracOrder;
use crate::graph::{
    check_assumption_one, social_difference, AgentRole, NetworkTopology, SocialStates,
};
use crate::sim::{ScenarioConfig, SimError};

pub use output::{
    write_report_json, write_series, write_trajectory_csv, RunManifest, SERIES_FILES,
};
pub use preset::{preset, preset_karate, preset_karate_inside, KARATE_ID, PRESET_NAMES};
pub use sweep::{
    exit, exit_code, run_scenario, run_scenario_with, sweep, write_sweep_table, GridPoint,
    RunOutcome, SweepGrid, SweepRow, CONTAINMENT_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: usize,
    pub role: AgentRole,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    #[serde(default = "default_k")]
    pub k: f64,
    /// One gain per follower in listing order; a single value applies to all.
    #[serde(default = "default_gains")]
    pub gains: Vec<f64>,
    pub delta: f64,
}

/// Which integrator `simulate` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Discrete convex-combination stepping at order one, predictor–corrector
    /// otherwise.
    #[default]
    Auto,
    Fractional,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub alpha: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub memory_window: Option<usize>,
    #[serde(default)]
    pub edge_addition: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { record_every: 1 }
    }
}

fn default_k() -> f64 {
    ControllerParams::DEFAULT_K
}
fn default_gains() -> Vec<f64> {
    vec![ControllerParams::DEFAULT_GAIN]
}
fn default_step() -> f64 {
    ScenarioConfig::DEFAULT_STEP
}
fn default_horizon() -> f64 {
    ScenarioConfig::DEFAULT_HORIZON
}
fn default_record_every() -> usize {
    1
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Defaults to the file stem when loaded from disk.
    #[serde(default)]
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub agents: Vec<AgentSpec>,
    pub edges: Vec<EdgeSpec>,
    pub controller: ControllerSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// One problem found while validating a scenario, located by a JSON path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<ValidationIssue>),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub description: String,
    pub config: ScenarioConfig,
    pub scheme: Scheme,
}

struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            agents: &'a [AgentSpec],
            edges: &'a [EdgeSpec],
            controller: &'a ControllerSpec,
            solver: &'a SolverSpec,
        }
        let canonical = serde_json::to_vec(&Hashed {
            agents: &self.agents,
            edges: &self.edges,
            controller: &self.controller,
            solver: &self.solver,
        })
        .expect("scenario serializes");
        hex::encode(Sha256::digest(canonical))
    }

    /// Full validation; every problem found is reported with its path.
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let mut issues = Issues(Vec::new());
        let n = self.agents.len();
        if n == 0 {
            issues.push(
                "agents",
                "at least one leader and one follower are required",
            );
        }
        let dim = self.agents.first().map_or(0, |a| a.state.len());
        for (i, a) in self.agents.iter().enumerate() {
            if a.id != i + 1 {
                issues.push(
                    format!("agents[{i}].id"),
                    format!("expected id {} (listing order), got {}", i + 1, a.id),
                );
            }
            if a.state.is_empty() || a.state.len() != dim {
                issues.push(
                    format!("agents[{i}].state"),
                    format!("expected {dim} coordinates, got {}", a.state.len()),
                );
            }
            if a.state.iter().any(|v| !v.is_finite()) {
                issues.push(format!("agents[{i}].state"), "coordinates must be finite");
            }
        }
        let roles: Vec<AgentRole> = self.agents.iter().map(|a| a.role).collect();
        let followers = roles.iter().filter(|r| **r == AgentRole::Follower).count();
        for (e, edge) in self.edges.iter().enumerate() {
            for (field, id) in [("from", edge.from), ("to", edge.to)] {
                if id == 0 || id > n {
                    issues.push(
                        format!("edges[{e}].{field}"),
                        format!("no agent with id {id}"),
                    );
                }
            }
            if edge.from == edge.to {
                issues.push(format!("edges[{e}]"), "self-loop");
            }
            if (1..=n).contains(&edge.from) && roles[edge.from - 1] == AgentRole::Leader {
                issues.push(
                    format!("edges[{e}].from"),
                    format!("agent {} is a leader and observes no one", edge.from),
                );
            }
            if self.edges[..e].contains(edge) {
                issues.push(format!("edges[{e}]"), "duplicate edge");
            }
        }
        let c = &self.controller;
        if !(c.k > 0.0 && c.k.is_finite()) {
            issues.push("controller.k", format!("must be positive, got {}", c.k));
        }
        if !(c.delta > 0.0 && c.delta.is_finite()) {
            issues.push(
                "controller.delta",
                format!("must be positive, got {}", c.delta),
            );
        }
        let gains = match c.gains.len() {
            1 => vec![c.gains[0]; followers],
            m if m == followers => c.gains.clone(),
            m => {
                issues.push(
                    "controller.gains",
                    format!("expected 1 or {followers} values, got {m}"),
                );
                Vec::new()
            }
        };
        for (i, g) in c.gains.iter().enumerate() {
            if !(*g > 0.0 && g.is_finite()) {
                issues.push(
                    format!("controller.gains[{i}]"),
                    format!("must be positive, got {g}"),
                );
            }
        }
        let s = &self.solver;
        let order = FracOrder::new(s.alpha);
        if order.is_err() {
            issues.push(
                "solver.alpha",
                format!("must lie in (0, 1], got {}", s.alpha),
            );
        }
        if !(s.step > 0.0 && s.step.is_finite()) {
            issues.push("solver.step", format!("must be positive, got {}", s.step));
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite() && s.horizon >= s.step) {
            issues.push(
                "solver.horizon",
                format!("must be at least one step, got {}", s.horizon),
            );
        }
        if s.memory_window == Some(0) {
            issues.push("solver.memory_window", "must be positive");
        }
        if self.output.record_every == 0 {
            issues.push("output.record_every", "must be positive");
        }
        if !issues.0.is_empty() {
            return Err(ScenarioError::Invalid(issues.0));
        }

        let edges: Vec<(usize, usize)> =
            self.edges.iter().map(|e| (e.from - 1, e.to - 1)).collect();
        let topology = match NetworkTopology::new(roles, edges, c.delta) {
            Ok(t) => t,
            Err(e) => {
                issues.push("edges", e.to_string());
                return Err(ScenarioError::Invalid(issues.0));
            }
        };
        for (e, edge) in self.edges.iter().enumerate() {
            let qi = &self.agents[edge.from - 1].state;
            let qj = &self.agents[edge.to - 1].state;
            let s = social_difference(qi, qj).unwrap_or(f64::INFINITY);
            if !(s < c.delta) {
                issues.push(
                    format!("edges[{e}]"),
                    format!(
                        "initial social difference {s} between agents {} and {} is not below delta = {}",
                        edge.from, edge.to, c.delta
                    ),
                );
            }
        }
        for f in check_assumption_one(&topology).unreachable {
            issues.push(
                format!("agents[{}]", f.index()),
                format!("follower {f} is not reachable from any leader"),
            );
        }
        if !issues.0.is_empty() {
            return Err(ScenarioError::Invalid(issues.0));
        }
        let config = ScenarioConfig {
            topology,
            initial_states: SocialStates::new(
                self.agents.iter().map(|a| a.state.clone()).collect(),
            )
            .map_err(|e| {
                ScenarioError::Invalid(vec![ValidationIssue {
                    path: "agents".into(),
                    message: e.to_string(),
                }])
            })?,
            params: ControllerParams { k: c.k, gains },
            order: order.expect("checked above"),
            step: s.step,
            horizon: s.horizon,
            edge_addition: s.edge_addition,
            memory_window: s.memory_window,
            seed: s.seed,
            record_every: self.output.record_every,
        };
        if let Err(errors) = config.validate() {
            return Err(ScenarioError::Invalid(
                errors
                    .into_iter()
                    .map(|e: SimError| ValidationIssue {
                        path: "scenario".into(),
                        message: e.to_string(),
                    })
                    .collect(),
            ));
        }
        Ok(Scenario {
            id: self.id.clone(),
            description: self.description.clone(),
            config,
            scheme: s.scheme,
        })
    }
}

impl Scenario {
    /// Document that loads back into an equal scenario.
    pub fn to_file(&self) -> ScenarioFile {
        let cfg = &self.config;
        let topo = &cfg.topology;
        let gains = &cfg.params.gains;
        ScenarioFile {
            id: self.id.clone(),
            description: self.description.clone(),
            agents: cfg
                .initial_states
                .iter()
                .enumerate()
                .map(|(i, q)| AgentSpec {
                    id: i + 1,
                    role: topo.roles()[i],
                    state: q.to_vec(),
                })
                .collect(),
            edges: topo
                .edges()
                .iter()
                .map(|(a, b)| EdgeSpec {
                    from: a.label(),
                    to: b.label(),
                })
                .collect(),
            controller: ControllerSpec {
                k: cfg.params.k,
                // equal gains collapse to the single-value form
                gains: match gains.split_first() {
                    Some((g, rest)) if rest.iter().all(|x| x == g) => vec![*g],
                    _ => gains.clone(),
                },
                delta: topo.delta(),
            },
            solver: SolverSpec {
                alpha: cfg.order.value(),
                step: cfg.step,
                horizon: cfg.horizon,
                memory_window: cfg.memory_window,
                edge_addition: cfg.edge_addition,
                seed: cfg.seed,
                scheme: self.scheme,
            },
            output: OutputSpec {
                record_every: cfg.record_every,
            },
        }
    }

    /// SHA-256 over the compact JSON of everything that affects the
    /// dynamics, taken from the normalized document (the output section is
    /// excluded).
    pub fn config_hash(&self) -> String {
        self.to_file().digest()
    }

    /// Scheme actually used for this scenario.
    pub fn resolved_scheme(&self) -> Scheme {
        match self.scheme {
            Scheme::Auto if self.config.order.is_integer() => Scheme::Discrete,
            Scheme::Auto => Scheme::Fractional,
            s => s,
        }
    }
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut file = ScenarioFile::from_json(&text)?;
    if file.id.is_empty() {
        file.id = path
            .file_stem()
            .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    }
    Ok(file)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario_file(path)?.build()
}
