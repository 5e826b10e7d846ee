//! Leader–follower network model.
//!
//! An access edge `(i, j)` means agent `i` reads agent `j`'s state, so
//! influence flows from `j` to `i`. Leaders never read anyone. Agent ids are
//! zero-based internally and printed one-based.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{self, ControllerError, ControllerParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    /// One-based label used in files and messages.
    pub fn label(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Leader,
    Follower,
}

impl AgentRole {
    pub fn tag(self) -> &'static str {
        match self {
            AgentRole::Leader => "L",
            AgentRole::Follower => "F",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("state dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("agent {agent} out of range for {count} agents")]
    AgentOutOfRange { agent: usize, count: usize },
    #[error("self-loop on agent {0}")]
    SelfLoop(AgentId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(AgentId, AgentId),
    #[error("leader {0} cannot read agent {1}")]
    LeaderEdge(AgentId, AgentId),
    #[error("network has no leader")]
    NoLeader,
    #[error("network has no follower")]
    NoFollower,
    #[error("follower {0} has no neighbors")]
    IsolatedFollower(AgentId),
    #[error("threshold delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("({0}, {1}) is not an access edge")]
    NotAnEdge(AgentId, AgentId),
    #[error("state of agent {0} is not finite")]
    NonFiniteState(AgentId),
    #[error("state list has {states} entries for {agents} agents")]
    StateCount { states: usize, agents: usize },
    #[error("edge ({from}, {to}) outside constraint set: margin {margin}")]
    ConstraintViolation {
        from: AgentId,
        to: AgentId,
        margin: f64,
    },
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency entry ({row}, {col}) is negative or not finite")]
    InvalidWeight { row: usize, col: usize },
    #[error("adjacency diagonal entry {0} is nonzero")]
    NonZeroDiagonal(usize),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

/// Directed access graph with roles and the social threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    roles: Vec<AgentRole>,
    edges: Vec<(AgentId, AgentId)>,
    delta: f64,
    neighbors: Vec<Vec<AgentId>>,
    followers: Vec<AgentId>,
    follower_row: Vec<Option<usize>>,
}

impl NetworkTopology {
    pub fn new(
        roles: Vec<AgentRole>,
        edges: Vec<(usize, usize)>,
        delta: f64,
    ) -> Result<Self, GraphError> {
        let n = roles.len();
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(GraphError::InvalidDelta(delta));
        }
        if !roles.contains(&AgentRole::Leader) {
            return Err(GraphError::NoLeader);
        }
        if !roles.contains(&AgentRole::Follower) {
            return Err(GraphError::NoFollower);
        }
        let mut seen = BTreeSet::new();
        let mut neighbors = vec![Vec::new(); n];
        let mut checked = Vec::with_capacity(edges.len());
        for (i, j) in edges {
            for a in [i, j] {
                if a >= n {
                    return Err(GraphError::AgentOutOfRange { agent: a, count: n });
                }
            }
            let (a, b) = (AgentId(i), AgentId(j));
            if i == j {
                return Err(GraphError::SelfLoop(a));
            }
            if roles[i] == AgentRole::Leader {
                return Err(GraphError::LeaderEdge(a, b));
            }
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            neighbors[i].push(b);
            checked.push((a, b));
        }
        let mut followers = Vec::new();
        let mut follower_row = vec![None; n];
        for (i, role) in roles.iter().enumerate() {
            if *role == AgentRole::Follower {
                if neighbors[i].is_empty() {
                    return Err(GraphError::IsolatedFollower(AgentId(i)));
                }
                follower_row[i] = Some(followers.len());
                followers.push(AgentId(i));
            }
        }
        Ok(NetworkTopology {
            roles,
            edges: checked,
            delta,
            neighbors,
            followers,
            follower_row,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[AgentRole] {
        &self.roles
    }

    pub fn role(&self, agent: AgentId) -> AgentRole {
        self.roles[agent.0]
    }

    pub fn is_leader(&self, agent: AgentId) -> bool {
        self.roles[agent.0] == AgentRole::Leader
    }

    /// Access edges in declaration order.
    pub fn edges(&self) -> &[(AgentId, AgentId)] {
        &self.edges
    }

    pub fn has_edge(&self, from: AgentId, to: AgentId) -> bool {
        self.neighbors
            .get(from.0)
            .is_some_and(|ns| ns.contains(&to))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn neighbors(&self, agent: AgentId) -> &[AgentId] {
        &self.neighbors[agent.0]
    }

    pub fn followers(&self) -> &[AgentId] {
        &self.followers
    }

    pub fn leaders(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == AgentRole::Leader)
            .map(|(i, _)| AgentId(i))
    }

    /// Row of `agent` in follower-indexed quantities (gains, interaction matrix).
    pub fn follower_row(&self, agent: AgentId) -> Option<usize> {
        self.follower_row.get(agent.0).copied().flatten()
    }

    /// Same network with extra access edges appended (already-present edges
    /// are skipped).
    pub fn with_added_edges(&self, extra: &[(AgentId, AgentId)]) -> Result<Self, GraphError> {
        let mut edges: Vec<(usize, usize)> = self.edges.iter().map(|(a, b)| (a.0, b.0)).collect();
        for &(a, b) in extra {
            if !self.has_edge(a, b) && !edges.contains(&(a.0, b.0)) {
                edges.push((a.0, b.0));
            }
        }
        NetworkTopology::new(self.roles.clone(), edges, self.delta)
    }
}

/// States of all agents, stored row-major (`agent x dimension`).
#[derive(Debug, Clone, PartialEq)]
pub struct SocialStates {
    dim: usize,
    values: Vec<f64>,
}

impl SocialStates {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let dim = states.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(GraphError::DimensionMismatch { left: 0, right: 1 });
        }
        let mut values = Vec::with_capacity(dim * states.len());
        for (i, q) in states.iter().enumerate() {
            if q.len() != dim {
                return Err(GraphError::DimensionMismatch {
                    left: dim,
                    right: q.len(),
                });
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(GraphError::NonFiniteState(AgentId(i)));
            }
            values.extend_from_slice(q);
        }
        Ok(SocialStates { dim, values })
    }

    /// Wraps a flat row-major buffer without validation.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, agent: AgentId) -> &[f64] {
        &self.values[agent.0 * self.dim..(agent.0 + 1) * self.dim]
    }

    pub fn get_mut(&mut self, agent: AgentId) -> &mut [f64] {
        &mut self.values[agent.0 * self.dim..(agent.0 + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Checks the state list fits the topology.
    pub fn check_against(&self, topology: &NetworkTopology) -> Result<(), GraphError> {
        if self.len() != topology.agent_count() {
            return Err(GraphError::StateCount {
                states: self.len(),
                agents: topology.agent_count(),
            });
        }
        Ok(())
    }
}

/// `S_ij = ||q_i - q_j||^2`.
pub fn social_difference(qi: &[f64], qj: &[f64]) -> Result<f64, GraphError> {
    if qi.len() != qj.len() {
        return Err(GraphError::DimensionMismatch {
            left: qi.len(),
            right: qj.len(),
        });
    }
    Ok(squared_distance(qi, qj))
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `b_ij = delta - S_ij` on an existing access edge.
pub fn edge_margin(
    topology: &NetworkTopology,
    states: &SocialStates,
    from: AgentId,
    to: AgentId,
) -> Result<f64, GraphError> {
    if !topology.has_edge(from, to) {
        return Err(GraphError::NotAnEdge(from, to));
    }
    Ok(topology.delta() - squared_distance(states.get(from), states.get(to)))
}

/// Margins of every access edge, in [`NetworkTopology::edges`] order.
pub fn edge_margins(topology: &NetworkTopology, states: &SocialStates) -> Vec<f64> {
    topology
        .edges()
        .iter()
        .map(|&(a, b)| topology.delta() - squared_distance(states.get(a), states.get(b)))
        .collect()
}

/// Result of the leader-reachability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    pub unreachable: Vec<AgentId>,
}

impl Reachability {
    pub fn is_ok(&self) -> bool {
        self.unreachable.is_empty()
    }
}

/// Every follower must be reachable from some leader along influence edges
/// (reversed access edges). Returns the followers that are not.
pub fn check_assumption_one(topology: &NetworkTopology) -> Reachability {
    let n = topology.agent_count();
    // influenced_by[j] lists agents that read j
    let mut influences = vec![Vec::new(); n];
    for &(reader, source) in topology.edges() {
        influences[source.0].push(reader.0);
    }
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = topology.leaders().map(|a| a.0).collect();
    for &l in &queue {
        reached[l] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &w in &influences[v] {
            if !reached[w] {
                reached[w] = true;
                queue.push_back(w);
            }
        }
    }
    Reachability {
        unreachable: topology
            .followers()
            .iter()
            .copied()
            .filter(|f| !reached[f.0])
            .collect(),
    }
}

/// Follower rows of the closed-loop interaction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    /// `m x n`, one row per follower.
    pub entries: DMatrix<f64>,
    /// Agent owning each row.
    pub follower_rows: Vec<AgentId>,
}

impl InteractionMatrix {
    /// Full `n x n` matrix with zero rows for leaders.
    pub fn embedded(&self) -> DMatrix<f64> {
        let n = self.entries.ncols();
        let mut full = DMatrix::zeros(n, n);
        for (r, agent) in self.follower_rows.iter().enumerate() {
            full.set_row(agent.0, &self.entries.row(r));
        }
        full
    }

    /// Smallest off-diagonal entry of the embedded matrix.
    pub fn min_off_diagonal(&self) -> f64 {
        let mut min = f64::INFINITY;
        for (r, agent) in self.follower_rows.iter().enumerate() {
            for c in 0..self.entries.ncols() {
                if c != agent.0 {
                    min = min.min(self.entries[(r, c)]);
                }
            }
        }
        min
    }

    pub fn max_abs_row_sum(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|row| row.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn is_metzler(&self) -> bool {
        self.min_off_diagonal() >= 0.0
    }
}

/// Builds the follower rows `pi(t)`: diagonal `-sum_j K_i m_ij`, neighbor
/// entries `K_i m_ij`, zero elsewhere.
pub fn assemble_pi_matrix(
    topology: &NetworkTopology,
    states: &SocialStates,
    params: &ControllerParams,
) -> Result<InteractionMatrix, GraphError> {
    states.check_against(topology)?;
    let n = topology.agent_count();
    let followers = topology.followers();
    let mut entries = DMatrix::zeros(followers.len(), n);
    let mut scratch = vec![0.0; states.dim()];
    for (r, &agent) in followers.iter().enumerate() {
        for &j in topology.neighbors(agent) {
            let margin = topology.delta() - squared_distance(states.get(agent), states.get(j));
            if margin <= 0.0 {
                return Err(GraphError::ConstraintViolation {
                    from: agent,
                    to: j,
                    margin,
                });
            }
        }
        let gain = params.gain(r);
        let neighbors = topology.neighbors(agent);
        let mut diag = 0.0;
        let mut next = 0;
        scratch.fill(0.0);
        controller::accumulate_gradient(
            states,
            topology,
            params,
            agent,
            |m| {
                let w = gain * m;
                entries[(r, neighbors[next].0)] = w;
                diag += w;
                next += 1;
            },
            &mut scratch,
        )?;
        entries[(r, agent.0)] = -diag;
    }
    Ok(InteractionMatrix {
        entries,
        follower_rows: followers.to_vec(),
    })
}

/// `L = A - D` with `D = diag(row sums of A)`.
pub fn metzler_laplacian(adjacency: &DMatrix<f64>) -> Result<DMatrix<f64>, GraphError> {
    let (rows, cols) = adjacency.shape();
    if rows != cols {
        return Err(GraphError::NotSquare { rows, cols });
    }
    for r in 0..rows {
        for c in 0..cols {
            let a = adjacency[(r, c)];
            if !(a >= 0.0 && a.is_finite()) {
                return Err(GraphError::InvalidWeight { row: r, col: c });
            }
        }
        if adjacency[(r, r)] != 0.0 {
            return Err(GraphError::NonZeroDiagonal(r));
        }
    }
    let mut l = adjacency.clone();
    for r in 0..rows {
        let off: f64 = adjacency.row(r).iter().sum();
        l[(r, r)] = -off;
    }
    Ok(l)
}
