//! Per-run verdicts assembled from a trajectory.

use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::geometry::{self, hull_volume, spread, ConvexHull};
use crate::graph::{NetworkTopology, SocialStates};
use crate::sim::{equilibrium_residual, Termination, TrajectoryRecord};

/// How follower containment was judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContainmentCheck {
    /// Euclidean distance to the exact leader hull (d <= 3).
    ExactHull,
    /// Distance outside the leaders' per-coordinate bounding box. Necessary
    /// for containment, not sufficient; used above three dimensions.
    CoordinateIntervals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub completed: bool,
    pub termination: Termination,
    pub connectivity_preserved: bool,
    pub min_margin_over_run: f64,
    pub containment_check: ContainmentCheck,
    /// Follower-row order.
    pub final_hull_distances: Vec<f64>,
    /// Hull of all agents at each recorded step; empty above three dimensions.
    pub hull_volume_series: Vec<f64>,
    /// Largest follower distance to the leader hull at each recorded step.
    pub max_hull_distance_series: Vec<f64>,
    pub spread_series: Vec<Vec<f64>>,
    /// Follower-row order; empty when the final state admits no evaluation.
    pub equilibrium_residuals: Vec<f64>,
}

enum LeaderRegion {
    Hull(ConvexHull),
    Boxed { lo: Vec<f64>, hi: Vec<f64> },
}

impl LeaderRegion {
    fn new(states: &SocialStates, topology: &NetworkTopology) -> Self {
        let leaders: Vec<&[f64]> = topology.leaders().map(|l| states.get(l)).collect();
        match geometry::hull_of(&leaders) {
            Ok(h) => LeaderRegion::Hull(h),
            Err(_) => {
                let d = states.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for q in &leaders {
                    for c in 0..d {
                        lo[c] = lo[c].min(q[c]);
                        hi[c] = hi[c].max(q[c]);
                    }
                }
                LeaderRegion::Boxed { lo, hi }
            }
        }
    }

    fn check(&self) -> ContainmentCheck {
        match self {
            LeaderRegion::Hull(_) => ContainmentCheck::ExactHull,
            LeaderRegion::Boxed { .. } => ContainmentCheck::CoordinateIntervals,
        }
    }

    fn distance(&self, p: &[f64]) -> f64 {
        match self {
            LeaderRegion::Hull(h) => h.distance(p).unwrap_or(f64::INFINITY),
            LeaderRegion::Boxed { lo, hi } => p
                .iter()
                .enumerate()
                .map(|(c, v)| (lo[c] - v).max(v - hi[c]).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Distance from every follower to the hull of the leaders, follower-row order.
pub fn follower_hull_distances(states: &SocialStates, topology: &NetworkTopology) -> Vec<f64> {
    let region = LeaderRegion::new(states, topology);
    topology
        .followers()
        .iter()
        .map(|&f| region.distance(states.get(f)))
        .collect()
}

/// Aggregates connectivity, containment, hull and equilibrium diagnostics.
/// Leaders are taken from the first recorded state (they never move).
pub fn build_report(
    trajectory: &TrajectoryRecord,
    topology: &NetworkTopology,
    params: &ControllerParams,
) -> ContainmentReport {
    let breach_margin = match &trajectory.termination {
        Termination::Aborted {
            margin: Some(m), ..
        } => *m,
        _ => f64::INFINITY,
    };
    let min_margin_over_run = trajectory.min_margin_overall.min(breach_margin);
    let Some(first) = trajectory.states.first() else {
        return ContainmentReport {
            completed: trajectory.is_completed(),
            termination: trajectory.termination.clone(),
            connectivity_preserved: min_margin_over_run > 0.0,
            min_margin_over_run,
            containment_check: ContainmentCheck::ExactHull,
            final_hull_distances: Vec::new(),
            hull_volume_series: Vec::new(),
            max_hull_distance_series: Vec::new(),
            spread_series: Vec::new(),
            equilibrium_residuals: Vec::new(),
        };
    };
    let region = LeaderRegion::new(first, topology);
    let mut hull_volume_series = Vec::new();
    let mut max_hull_distance_series = Vec::with_capacity(trajectory.states.len());
    let mut spread_series = Vec::with_capacity(trajectory.states.len());
    for s in &trajectory.states {
        if let LeaderRegion::Hull(_) = region {
            let all: Vec<&[f64]> = s.iter().collect();
            let v = geometry::hull_of(&all).and_then(|h| hull_volume(&h));
            hull_volume_series.push(v.unwrap_or(f64::NAN));
        }
        max_hull_distance_series.push(
            topology
                .followers()
                .iter()
                .map(|&f| region.distance(s.get(f)))
                .fold(0.0, f64::max),
        );
        spread_series.push(spread(s));
    }
    let last = trajectory.states.last().unwrap_or(first);
    // residuals against the initial edge set; empty for aborted runs
    let equilibrium_residuals = if trajectory.is_completed() {
        equilibrium_residual(last, topology, params).unwrap_or_default()
    } else {
        Vec::new()
    };
    ContainmentReport {
        completed: trajectory.is_completed(),
        termination: trajectory.termination.clone(),
        connectivity_preserved: min_margin_over_run > 0.0,
        min_margin_over_run,
        containment_check: region.check(),
        final_hull_distances: topology
            .followers()
            .iter()
            .map(|&f| region.distance(last.get(f)))
            .collect(),
        hull_volume_series,
        max_hull_distance_series,
        spread_series,
        equilibrium_residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac::FracOrder;
    use crate::graph::AgentRole::{Follower as F, Leader as L};
    use crate::sim::{run_fractional, run_integer_discrete, ScenarioConfig};

    fn triangle(follower: [f64; 2], alpha: f64) -> ScenarioConfig {
        ScenarioConfig {
            topology: NetworkTopology::new(vec![L, L, L, F], vec![(3, 0), (3, 1), (3, 2)], 4.0)
                .unwrap(),
            initial_states: SocialStates::new(vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                follower.to_vec(),
            ])
            .unwrap(),
            params: ControllerParams::uniform(2.0, 1.0, 1),
            order: FracOrder::new(alpha).unwrap(),
            step: 1e-2,
            horizon: 10.0,
            edge_addition: false,
            memory_window: None,
            seed: 0,
            record_every: 1,
        }
    }

    #[test]
    fn inside_start_keeps_volume_constant() {
        let cfg = triangle([0.2, 0.2], 0.7);
        let rec = run_fractional(&cfg).unwrap();
        let r = build_report(&rec, &cfg.topology, &cfg.params);
        assert!(r.completed && r.connectivity_preserved);
        assert!(r.hull_volume_series.iter().all(|v| (v - 0.5).abs() < 1e-9));
        assert!(r.max_hull_distance_series.iter().all(|d| *d <= 1e-9));
        assert_eq!(r.containment_check, ContainmentCheck::ExactHull);
    }

    #[test]
    fn outside_start_is_drawn_in() {
        let cfg = triangle([1.2, 1.2], 1.0);
        let rec = run_integer_discrete(&cfg).unwrap();
        let r = build_report(&rec, &cfg.topology, &cfg.params);
        assert!(r.max_hull_distance_series[0] > 0.5);
        assert!(r.final_hull_distances[0] < 1e-3);
        assert!(r.equilibrium_residuals[0] < 1e-3);
        assert!(r.connectivity_preserved);
    }

    #[test]
    fn aborted_run_is_marked() {
        let mut cfg = triangle([0.2, 0.2], 1.0);
        cfg.step = 10.0;
        cfg.horizon = 20.0;
        let fail = run_integer_discrete(&cfg).unwrap_err();
        let r = build_report(&fail.partial, &cfg.topology, &cfg.params);
        assert!(!r.completed);
        assert!(matches!(
            r.termination,
            Termination::Aborted { step: 1, .. }
        ));
        assert!(r.equilibrium_residuals.is_empty());
    }
}
