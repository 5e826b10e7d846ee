//! Closed-loop simulation of the follower dynamics.
//!
//! Two schemes share one recording format:
//!
//! * [`run_fractional`] integrates `D^alpha q_i = -K_i grad phi_i` for the
//!   stacked follower state with the predictor–corrector solver. The field is
//!   always evaluated on the whole snapshot, never on frozen neighbors.
//! * [`run_integer_discrete`] takes explicit convex-combination steps
//!   `q_i <- (1 - T sum_j pi_ij) q_i + T sum_j pi_ij q_j` and refuses step
//!   sizes that would make a coefficient negative.

use std::cell::{Cell, RefCell};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{self, ControllerError, ControllerParams, BARRIER_FLOOR};
use crate::exec::{self, Execution};
use crate::frac::{integrate, AbmOptions, FracError, FracOrder};
use crate::graph::{
    assemble_pi_matrix, check_assumption_one, squared_distance, AgentId, GraphError,
    NetworkTopology, SocialStates,
};

/// With edge addition on, a follower starts observing an agent once their
/// social difference falls to this fraction of the threshold.
pub const EDGE_ADDITION_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("barrier breach at step {step} on edge ({from}, {to}): margin {margin}")]
    Barrier {
        step: usize,
        from: AgentId,
        to: AgentId,
        margin: f64,
    },
    #[error("state diverged at step {step}")]
    Divergence { step: usize },
    #[error(
        "step size too large: follower {follower} gets self-coefficient {coefficient} at step {step}; \
         use a smaller T"
    )]
    StepSize {
        step: usize,
        follower: AgentId,
        coefficient: f64,
    },
    #[error("follower {0} has a zero diagonal interaction entry")]
    DegenerateRow(AgentId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Numerics(FracError),
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: NetworkTopology,
    pub initial_states: SocialStates,
    pub params: ControllerParams,
    pub order: FracOrder,
    pub step: f64,
    pub horizon: f64,
    pub edge_addition: bool,
    pub memory_window: Option<usize>,
    pub seed: u64,
    /// Recording stride; never affects the dynamics.
    pub record_every: usize,
}

impl ScenarioConfig {
    pub const DEFAULT_STEP: f64 = 1e-3;
    pub const DEFAULT_HORIZON: f64 = 50.0;

    /// Checks everything a run relies on: gains per follower, state count,
    /// positive step and horizon, strictly positive initial margins and leader
    /// reachability.
    pub fn validate(&self) -> Result<(), Vec<SimError>> {
        let mut errors = Vec::new();
        let followers = self.topology.followers().len();
        if self.params.gains.len() != followers {
            errors.push(SimError::Validation(format!(
                "{} gains given for {followers} followers",
                self.params.gains.len()
            )));
        }
        if let Err(e) = ControllerParams::new(self.params.k, self.params.gains.clone()) {
            errors.push(SimError::Validation(e.to_string()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            errors.push(SimError::Validation(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.horizon < self.step {
            errors.push(SimError::Validation(format!(
                "horizon must be at least one step, got {}",
                self.horizon
            )));
        }
        if self.record_every == 0 {
            errors.push(SimError::Validation(
                "record stride must be positive".into(),
            ));
        }
        if self.memory_window == Some(0) {
            errors.push(SimError::Validation(
                "memory window must be positive".into(),
            ));
        }
        if let Err(e) = self.initial_states.check_against(&self.topology) {
            errors.push(e.into());
            return Err(errors);
        }
        for (agent, q) in self.initial_states.iter().enumerate() {
            if q.iter().any(|v| !v.is_finite()) {
                errors.push(GraphError::NonFiniteState(AgentId(agent)).into());
            }
        }
        for &(from, to) in self.topology.edges() {
            let margin = self.topology.delta()
                - squared_distance(self.initial_states.get(from), self.initial_states.get(to));
            if !(margin > 0.0) {
                errors.push(GraphError::ConstraintViolation { from, to, margin }.into());
            }
        }
        let reach = check_assumption_one(&self.topology);
        for f in reach.unreachable {
            errors.push(SimError::Validation(format!(
                "follower {f} is not reachable from any leader"
            )));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Stacked follower coordinates, in follower-row order.
    fn follower_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.topology.followers().len() * self.initial_states.dim());
        for &f in self.topology.followers() {
            x.extend_from_slice(self.initial_states.get(f));
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    Aborted {
        step: usize,
        reason: String,
        /// Offending margin when the run stopped at the barrier.
        margin: Option<f64>,
    },
}

/// Per-run diagnostics of the discrete scheme's update coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDiagnostics {
    pub min_coefficient: f64,
    pub max_sum_error: f64,
}

/// Time series produced by a run. Margins are recorded for the initial edges,
/// in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<SocialStates>,
    pub edges: Vec<(AgentId, AgentId)>,
    pub margins: Vec<Vec<f64>>,
    /// Smallest margin over all current edges at each recorded step.
    pub min_margin: Vec<f64>,
    /// Smallest margin seen at any step, recorded or not.
    pub min_margin_overall: f64,
    pub matrix_min_off_diagonal: Vec<f64>,
    pub matrix_max_row_sum: Vec<f64>,
    pub added_edges: Vec<(usize, AgentId, AgentId)>,
    pub coefficients: Option<CoefficientDiagnostics>,
    pub termination: Termination,
}

impl TrajectoryRecord {
    fn new(edges: Vec<(AgentId, AgentId)>) -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            states: Vec::new(),
            edges,
            margins: Vec::new(),
            min_margin: Vec::new(),
            min_margin_overall: f64::INFINITY,
            matrix_min_off_diagonal: Vec::new(),
            matrix_max_row_sum: Vec::new(),
            added_edges: Vec::new(),
            coefficients: None,
            termination: Termination::Completed,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn final_states(&self) -> Option<&SocialStates> {
        self.states.last()
    }
}

/// A run that stopped early, with everything recorded up to that point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: SimError,
    pub partial: Box<TrajectoryRecord>,
}

/// Shared bookkeeping for both schemes.
struct Recorder<'a> {
    config: &'a ScenarioConfig,
    topology: RefCell<NetworkTopology>,
    record: RefCell<TrajectoryRecord>,
    scratch: RefCell<SocialStates>,
    last_step: Cell<usize>,
}

impl<'a> Recorder<'a> {
    fn new(config: &'a ScenarioConfig) -> Self {
        Recorder {
            config,
            topology: RefCell::new(config.topology.clone()),
            record: RefCell::new(TrajectoryRecord::new(config.topology.edges().to_vec())),
            scratch: RefCell::new(config.initial_states.clone()),
            last_step: Cell::new(0),
        }
    }

    /// Full state with leaders untouched and followers from `x`.
    fn fill(&self, states: &mut SocialStates, x: &[f64]) {
        let d = states.dim();
        for (r, &f) in self.config.topology.followers().iter().enumerate() {
            states.get_mut(f).copy_from_slice(&x[r * d..(r + 1) * d]);
        }
    }

    fn accept(&self, m: usize, x: &[f64]) -> Result<(), SimError> {
        self.last_step.set(m);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Divergence { step: m });
        }
        let mut states = self.scratch.borrow_mut();
        self.fill(&mut states, x);
        let delta = self.config.topology.delta();
        let mut rec = self.record.borrow_mut();
        {
            let topo = self.topology.borrow();
            let mut min = f64::INFINITY;
            for &(a, b) in topo.edges() {
                let margin = delta - squared_distance(states.get(a), states.get(b));
                if margin < BARRIER_FLOOR * delta {
                    return Err(SimError::Barrier {
                        step: m,
                        from: a,
                        to: b,
                        margin,
                    });
                }
                min = min.min(margin);
            }
            rec.min_margin_overall = rec.min_margin_overall.min(min);
            let steps = self.config.steps();
            if m.is_multiple_of(self.config.record_every) || m == steps {
                let pi = assemble_pi_matrix(&topo, &states, &self.config.params)?;
                rec.times.push(m as f64 * self.config.step);
                let margins = rec
                    .edges
                    .iter()
                    .map(|&(a, b)| delta - squared_distance(states.get(a), states.get(b)))
                    .collect();
                rec.margins.push(margins);
                rec.min_margin.push(min);
                rec.matrix_min_off_diagonal.push(pi.min_off_diagonal());
                rec.matrix_max_row_sum.push(pi.max_abs_row_sum());
                rec.states.push(states.clone());
            }
        }
        if self.config.edge_addition {
            let added = self.candidate_edges(&states);
            if !added.is_empty() {
                let mut topo = self.topology.borrow_mut();
                *topo = topo.with_added_edges(&added)?;
                rec.added_edges
                    .extend(added.into_iter().map(|(a, b)| (m, a, b)));
            }
        }
        Ok(())
    }

    fn candidate_edges(&self, states: &SocialStates) -> Vec<(AgentId, AgentId)> {
        let topo = self.topology.borrow();
        let limit = EDGE_ADDITION_FRACTION * topo.delta();
        let mut out = Vec::new();
        for &f in topo.followers() {
            for j in (0..topo.agent_count()).map(AgentId) {
                if j != f
                    && !topo.has_edge(f, j)
                    && squared_distance(states.get(f), states.get(j)) <= limit
                {
                    out.push((f, j));
                }
            }
        }
        out
    }

    fn finish(self, outcome: Result<(), SimError>) -> Result<TrajectoryRecord, RunFailure> {
        let mut record = self.record.into_inner();
        match outcome {
            Ok(()) => Ok(record),
            Err(error) => {
                let step = match &error {
                    SimError::Barrier { step, .. }
                    | SimError::Divergence { step }
                    | SimError::StepSize { step, .. } => *step,
                    _ => self.last_step.get(),
                };
                let margin = match &error {
                    SimError::Barrier { margin, .. } => Some(*margin),
                    _ => None,
                };
                record.termination = Termination::Aborted {
                    step,
                    reason: error.to_string(),
                    margin,
                };
                Err(RunFailure {
                    error,
                    partial: Box::new(record),
                })
            }
        }
    }
}

fn map_controller_error(e: ControllerError, step: usize) -> SimError {
    match e {
        ControllerError::BarrierBreach {
            follower,
            neighbor,
            margin,
        } => SimError::Barrier {
            step,
            from: follower,
            to: neighbor,
            margin,
        },
        other => SimError::Graph(GraphError::Controller(other)),
    }
}

fn map_frac_error(e: FracError) -> SimError {
    match e {
        FracError::Divergence { step } => SimError::Divergence { step },
        other => SimError::Numerics(other),
    }
}

/// `-K_i grad phi_i` for every follower of `states`, stacked.
pub fn closed_loop_field(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
    mode: Execution,
    out: &mut [f64],
) -> Result<(), ControllerError> {
    let d = states.dim();
    let followers = topology.followers();
    if mode.is_parallel() {
        let grads = exec::map_indexed(mode, followers.len(), |r| {
            controller::potential_gradient(states, topology, params, followers[r])
        });
        for (r, g) in grads.into_iter().enumerate() {
            let gain = params.gain(r);
            for (o, gc) in out[r * d..(r + 1) * d].iter_mut().zip(g?) {
                *o = -gain * gc;
            }
        }
        return Ok(());
    }
    out.fill(0.0);
    for (r, &f) in followers.iter().enumerate() {
        let row = &mut out[r * d..(r + 1) * d];
        controller::accumulate_gradient(states, topology, params, f, |_| {}, row)?;
        let gain = params.gain(r);
        row.iter_mut().for_each(|v| *v *= -gain);
    }
    Ok(())
}

fn check_config(config: &ScenarioConfig) -> Result<(), RunFailure> {
    config.validate().map_err(|mut errors| RunFailure {
        error: errors.swap_remove(0),
        partial: Box::new(TrajectoryRecord::new(config.topology.edges().to_vec())),
    })
}

/// Integrates the fractional closed loop; followers evaluated sequentially.
pub fn run_fractional(config: &ScenarioConfig) -> Result<TrajectoryRecord, RunFailure> {
    run_fractional_with(config, Execution::Sequential)
}

/// As [`run_fractional`], with per-follower gradient evaluation spread
/// according to `mode`. Only worth it for large networks.
pub fn run_fractional_with(
    config: &ScenarioConfig,
    mode: Execution,
) -> Result<TrajectoryRecord, RunFailure> {
    check_config(config)?;
    let rec = Recorder::new(config);
    let field_states = RefCell::new(config.initial_states.clone());
    let options = AbmOptions {
        memory_window: config.memory_window,
        ..AbmOptions::default()
    };
    let outcome = integrate(
        |x: &[f64], out: &mut [f64]| -> Result<(), SimError> {
            let mut states = field_states.borrow_mut();
            rec.fill(&mut states, x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Divergence {
                    step: rec.last_step.get() + 1,
                });
            }
            let topo = rec.topology.borrow();
            closed_loop_field(&states, &topo, &config.params, mode, out)
                .map_err(|e| map_controller_error(e, rec.last_step.get() + 1))
        },
        &config.follower_vector(),
        config.order,
        config.step,
        config.steps(),
        &options,
        |m, x| rec.accept(m, x),
    );
    rec.finish(outcome.map_err(|e| match e {
        SimError::Numerics(f) => map_frac_error(f),
        other => other,
    }))
}

impl From<FracError> for SimError {
    fn from(e: FracError) -> Self {
        map_frac_error(e)
    }
}

/// Explicit convex-combination stepping of the integer-order loop.
pub fn run_integer_discrete(config: &ScenarioConfig) -> Result<TrajectoryRecord, RunFailure> {
    check_config(config)?;
    let rec = Recorder::new(config);
    let outcome = discrete_loop(config, &rec);
    rec.finish(outcome)
}

fn discrete_loop(config: &ScenarioConfig, rec: &Recorder<'_>) -> Result<(), SimError> {
    let t = config.step;
    let d = config.initial_states.dim();
    let mut states = config.initial_states.clone();
    let mut x = config.follower_vector();
    let mut next = x.clone();
    let mut diag = CoefficientDiagnostics {
        min_coefficient: f64::INFINITY,
        max_sum_error: 0.0,
    };
    rec.accept(0, &x)?;
    for m in 1..=config.steps() {
        rec.fill(&mut states, &x);
        let topo = rec.topology.borrow().clone();
        let pi = assemble_pi_matrix(&topo, &states, &config.params).map_err(|e| match e {
            GraphError::ConstraintViolation { from, to, margin } => SimError::Barrier {
                step: m - 1,
                from,
                to,
                margin,
            },
            GraphError::Controller(c) => map_controller_error(c, m - 1),
            other => SimError::Graph(other),
        })?;
        for (r, &f) in topo.followers().iter().enumerate() {
            let row = pi.entries.row(r);
            let neighbors = topo.neighbors(f);
            let off: f64 = neighbors.iter().map(|j| row[j.0]).sum();
            let self_coef = 1.0 - t * off;
            if self_coef < 0.0 {
                return Err(SimError::StepSize {
                    step: m,
                    follower: f,
                    coefficient: self_coef,
                });
            }
            let mut sum = self_coef;
            let mut min = self_coef;
            let out = &mut next[r * d..(r + 1) * d];
            for (o, q) in out.iter_mut().zip(states.get(f)) {
                *o = self_coef * q;
            }
            for &j in neighbors {
                let c = t * row[j.0];
                sum += c;
                min = min.min(c);
                for (o, q) in out.iter_mut().zip(states.get(j)) {
                    *o += c * q;
                }
            }
            diag.min_coefficient = diag.min_coefficient.min(min);
            diag.max_sum_error = diag.max_sum_error.max((sum - 1.0).abs());
        }
        std::mem::swap(&mut x, &mut next);
        rec.record.borrow_mut().coefficients = Some(diag);
        rec.accept(m, &x)?;
    }
    Ok(())
}

/// `||q_i - (1 / -pi_ii) sum_j pi_ij q_j||` per follower, in follower-row
/// order. Zero exactly when `q_i` is the weighted average of its neighbors.
pub fn equilibrium_residual(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
) -> Result<Vec<f64>, SimError> {
    let pi = assemble_pi_matrix(topology, states, params)?;
    let d = states.dim();
    topology
        .followers()
        .iter()
        .enumerate()
        .map(|(r, &f)| {
            let diag = pi.entries[(r, f.0)];
            if diag == 0.0 {
                return Err(SimError::DegenerateRow(f));
            }
            let mut avg = vec![0.0; d];
            for &j in topology.neighbors(f) {
                let w = pi.entries[(r, j.0)] / -diag;
                for (a, q) in avg.iter_mut().zip(states.get(j)) {
                    *a += w * q;
                }
            }
            Ok(squared_distance(states.get(f), &avg).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AgentRole::{Follower as F, Leader as L};

    fn segment(alpha: f64, x0: f64, step: f64, horizon: f64) -> ScenarioConfig {
        ScenarioConfig {
            topology: NetworkTopology::new(vec![L, F, L], vec![(1, 0), (1, 2)], 4.0).unwrap(),
            initial_states: SocialStates::new(vec![vec![-1.0], vec![x0], vec![1.0]]).unwrap(),
            params: ControllerParams::uniform(2.0, 1.0, 1),
            order: FracOrder::new(alpha).unwrap(),
            step,
            horizon,
            edge_addition: false,
            memory_window: None,
            seed: 0,
            record_every: 1,
        }
    }

    #[test]
    fn follower_between_two_leaders_settles_inside() {
        let rec = run_integer_discrete(&segment(1.0, 0.7, 1e-2, 30.0)).unwrap();
        let q = rec.final_states().unwrap().get(AgentId(1))[0];
        assert!(q.abs() < 1e-6, "{q}");
        let c = rec.coefficients.unwrap();
        assert!(c.min_coefficient >= 0.0 && c.max_sum_error < 1e-12);
    }

    #[test]
    fn fractional_run_keeps_leaders_fixed() {
        let rec = run_fractional(&segment(0.6, 0.7, 1e-2, 5.0)).unwrap();
        for s in &rec.states {
            assert_eq!(s.get(AgentId(0)), &[-1.0]);
            assert_eq!(s.get(AgentId(2)), &[1.0]);
        }
        assert_eq!(rec.times.len(), 501);
        assert!(rec.min_margin.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn follower_on_its_only_neighbor_stays_put() {
        // with a single leader neighbor, starting on it means zero gradient
        let mut cfg = segment(0.5, -1.0, 1e-2, 1.0);
        cfg.topology = NetworkTopology::new(vec![L, F, L], vec![(1, 0)], 4.0).unwrap();
        let rec = run_fractional(&cfg).unwrap();
        assert!(rec.states.iter().all(|s| s.get(AgentId(1)) == [-1.0]));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let err = run_integer_discrete(&segment(1.0, 0.7, 5.0, 50.0)).unwrap_err();
        assert!(matches!(err.error, SimError::StepSize { step: 1, .. }));
        assert!(!err.partial.is_completed());
    }

    #[test]
    fn recording_stride_does_not_change_dynamics() {
        let a = run_fractional(&segment(0.8, 0.3, 1e-2, 2.0)).unwrap();
        let mut cfg = segment(0.8, 0.3, 1e-2, 2.0);
        cfg.record_every = 10;
        let b = run_fractional(&cfg).unwrap();
        assert_eq!(b.times.len(), 21);
        assert_eq!(a.states.last(), b.states.last());
        assert_eq!(a.states[50], b.states[5]);
    }

    #[test]
    fn validation_reports_every_problem() {
        let mut cfg = segment(1.0, 3.5, -1.0, 1.0);
        cfg.params = ControllerParams::uniform(2.0, 1.0, 2);
        let errs = cfg.validate().unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
    }

    #[test]
    fn equilibrium_residuals() {
        let topo = NetworkTopology::new(vec![L, F], vec![(1, 0)], 1.0).unwrap();
        let p = ControllerParams::uniform(2.0, 1.0, 1);
        let s = SocialStates::new(vec![vec![0.2, 0.3], vec![0.2, 0.3]]).unwrap();
        assert_eq!(equilibrium_residual(&s, &topo, &p).unwrap(), vec![0.0]);
        let s = SocialStates::new(vec![vec![0.2, 0.3], vec![0.3, 0.3]]).unwrap();
        assert!(equilibrium_residual(&s, &topo, &p).unwrap()[0] > 0.0);
    }

    #[test]
    fn edge_addition_links_close_agents() {
        let mut cfg = segment(1.0, 0.9, 1e-2, 1.0);
        cfg.topology = NetworkTopology::new(vec![L, F, L], vec![(1, 0)], 4.0).unwrap();
        cfg.edge_addition = true;
        let rec = run_integer_discrete(&cfg).unwrap();
        assert_eq!(rec.added_edges.first(), Some(&(0, AgentId(1), AgentId(2))));
        assert_eq!(rec.margins[0].len(), 1);
    }
}
