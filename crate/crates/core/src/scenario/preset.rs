//! Built-in scenarios.
//!
//! `karate` is a ten-agent stand-in for the classic club network: three
//! leaders (ids 8–10) at the corners of a unit triangle and seven followers
//! (ids 1–7) whose observation edges form a directed graph in which every
//! follower hears, directly or through other followers, from all three
//! leaders. It is not the original club's edge list, which is not available
//! here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    AgentSpec, ControllerSpec, EdgeSpec, OutputSpec, Scenario, ScenarioError, ScenarioFile, Scheme,
    SolverSpec,
};
use crate::graph::AgentRole;

pub const KARATE_ID: &str = "karate-stand-in";
pub const PRESET_NAMES: [&str; 2] = ["karate", "karate-inside"];

const LEADERS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866_025_403_784_438_6]];
const DELTA: f64 = 1.5;
/// Followers start in a disk of this radius around the leader centroid.
const START_RADIUS: f64 = 0.45;
const MIN_START_MARGIN: f64 = 0.1;

/// `(observer, observed)`, one-based.
const EDGES: [(usize, usize); 21] = [
    (1, 8),
    (1, 9),
    (1, 2),
    (2, 9),
    (2, 10),
    (2, 3),
    (3, 10),
    (3, 8),
    (3, 1),
    (4, 1),
    (4, 2),
    (4, 8),
    (5, 2),
    (5, 3),
    (5, 9),
    (6, 4),
    (6, 5),
    (6, 3),
    (7, 6),
    (7, 1),
    (7, 10),
];

#[derive(Clone, Copy)]
enum Placement {
    Disk,
    InsideLeaders,
}

fn centroid() -> [f64; 2] {
    [
        LEADERS.iter().map(|p| p[0]).sum::<f64>() / 3.0,
        LEADERS.iter().map(|p| p[1]).sum::<f64>() / 3.0,
    ]
}

fn sample(rng: &mut ChaCha8Rng, placement: Placement) -> [f64; 2] {
    match placement {
        Placement::Disk => {
            let c = centroid();
            loop {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let y: f64 = rng.gen_range(-1.0..1.0);
                if x * x + y * y <= 1.0 {
                    return [c[0] + START_RADIUS * x, c[1] + START_RADIUS * y];
                }
            }
        }
        Placement::InsideLeaders => {
            // uniform in the triangle, every barycentric coordinate >= 0.02
            let (u, v) = loop {
                let (u, v): (f64, f64) = (rng.gen_range(0.02..0.96), rng.gen_range(0.02..0.96));
                if u + v <= 0.98 {
                    break (u, v);
                }
            };
            let [a, b, c] = LEADERS;
            [
                a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
                a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
            ]
        }
    }
}

fn margin_ok(states: &[[f64; 2]]) -> bool {
    EDGES.iter().all(|&(i, j)| {
        let (p, q) = (states[i - 1], states[j - 1]);
        let s = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        DELTA - s >= MIN_START_MARGIN * DELTA
    })
}

fn karate_file(seed: u64, placement: Placement) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = loop {
        let mut s: Vec<[f64; 2]> = (0..7).map(|_| sample(&mut rng, placement)).collect();
        s.extend(LEADERS);
        if margin_ok(&s) {
            break s;
        }
    };
    let agents = states
        .iter()
        .enumerate()
        .map(|(i, q)| AgentSpec {
            id: i + 1,
            role: if i < 7 {
                AgentRole::Follower
            } else {
                AgentRole::Leader
            },
            state: q.to_vec(),
        })
        .collect();
    let (id, description) = match placement {
        Placement::Disk => (
            KARATE_ID,
            "karate club stand-in; followers start around the leader triangle",
        ),
        Placement::InsideLeaders => (
            "karate-stand-in-inside",
            "karate club stand-in; followers start inside the leader triangle",
        ),
    };
    ScenarioFile {
        id: id.into(),
        description: description.into(),
        agents,
        edges: EDGES
            .iter()
            .map(|&(from, to)| EdgeSpec { from, to })
            .collect(),
        controller: ControllerSpec {
            k: 2.0,
            gains: vec![1.0],
            delta: DELTA,
        },
        solver: SolverSpec {
            alpha: 1.0,
            step: 1e-3,
            horizon: 50.0,
            memory_window: None,
            edge_addition: false,
            seed,
            scheme: Scheme::Auto,
        },
        output: OutputSpec::default(),
    }
}

/// Preset document by name, ready for overrides before validation.
pub fn preset(name: &str, seed: u64) -> Result<ScenarioFile, ScenarioError> {
    match name {
        "karate" => Ok(karate_file(seed, Placement::Disk)),
        "karate-inside" => Ok(karate_file(seed, Placement::InsideLeaders)),
        other => Err(ScenarioError::UnknownPreset(other.into())),
    }
}

/// Karate stand-in with followers drawn around the leaders from `seed`.
pub fn preset_karate(seed: u64) -> Scenario {
    karate_file(seed, Placement::Disk)
        .build()
        .expect("preset is valid")
}

/// Karate stand-in with every follower strictly inside the leader triangle.
pub fn preset_karate_inside(seed: u64) -> Scenario {
    karate_file(seed, Placement::InsideLeaders)
        .build()
        .expect("preset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        for seed in 0..20 {
            let s = preset_karate(seed);
            let topo = &s.config.topology;
            assert_eq!(topo.agent_count(), 10);
            assert_eq!(topo.followers().len(), 7);
            assert_eq!(topo.leaders().count(), 3);
            assert_eq!(s, preset_karate(seed));
        }
        assert_ne!(preset_karate(0), preset_karate(1));
    }

    #[test]
    fn every_follower_has_two_neighbors() {
        let s = preset_karate(0);
        for &f in s.config.topology.followers() {
            assert!(s.config.topology.neighbors(f).len() >= 2);
        }
    }

    #[test]
    fn inside_variant_starts_inside() {
        use crate::report::follower_hull_distances;
        for seed in 0..200 {
            let s = preset_karate_inside(seed);
            let d = follower_hull_distances(&s.config.initial_states, &s.config.topology);
            assert!(d.iter().all(|d| *d == 0.0), "seed {seed}: {d:?}");
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            preset("zachary", 0),
            Err(ScenarioError::UnknownPreset(_))
        ));
    }
}
