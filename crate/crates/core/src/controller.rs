//! Decentralized navigation-function influence law.
//!
//! For follower `i` with neighbors `N_i`:
//!
//! ```text
//! gamma_i = 1/2 sum_j ||q_i - q_j||^2            goal (consensus)
//! beta_i  = 1/2 prod_j (delta - ||q_i - q_j||^2)  constraint (bonds intact)
//! phi_i   = gamma_i / (gamma_i^k + beta_i)^(1/k)  potential in [0, 1]
//! u_i     = -K_i grad phi_i = -K_i sum_j m_ij (q_i - q_j)
//! ```
//!
//! `phi_i` reaches 1 on the boundary of the constraint set, which keeps
//! trajectories that start inside away from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{squared_distance, AgentId, NetworkTopology, SocialStates};

/// Margins below `BARRIER_FLOOR * delta` are treated as a breach.
pub const BARRIER_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("agent {0} is a leader; the influence law only applies to followers")]
    NotAFollower(AgentId),
    #[error("potential undefined at gamma = {gamma}, beta = {beta}")]
    UndefinedPoint { gamma: f64, beta: f64 },
    #[error("barrier breach on edge ({follower}, {neighbor}): margin {margin}")]
    BarrierBreach {
        follower: AgentId,
        neighbor: AgentId,
        margin: f64,
    },
    #[error("invalid controller parameters: {0}")]
    InvalidParams(String),
}

/// Tuning exponent `k` and per-follower gains `K_i` (follower-row order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub k: f64,
    pub gains: Vec<f64>,
}

impl ControllerParams {
    pub const DEFAULT_K: f64 = 2.0;
    pub const DEFAULT_GAIN: f64 = 1.0;

    pub fn new(k: f64, gains: Vec<f64>) -> Result<Self, ControllerError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(ControllerError::InvalidParams(format!(
                "k must be positive, got {k}"
            )));
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(ControllerError::InvalidParams(format!(
                "gains must be positive, got {g}"
            )));
        }
        Ok(ControllerParams { k, gains })
    }

    /// Same gain for every one of `followers` followers.
    pub fn uniform(k: f64, gain: f64, followers: usize) -> Self {
        ControllerParams {
            k,
            gains: vec![gain; followers],
        }
    }

    #[inline]
    pub fn gain(&self, follower_row: usize) -> f64 {
        self.gains[follower_row]
    }
}

/// Every intermediate quantity of the potential for one follower.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialBreakdown {
    pub gamma: f64,
    pub beta: f64,
    pub phi: f64,
    /// Aligned with `neighbors`.
    pub m_coeffs: Vec<f64>,
    pub neighbors: Vec<AgentId>,
    pub gradient: Vec<f64>,
}

fn require_follower(topology: &NetworkTopology, agent: AgentId) -> Result<(), ControllerError> {
    if topology.is_leader(agent) {
        Err(ControllerError::NotAFollower(agent))
    } else {
        Ok(())
    }
}

pub fn goal_value(
    states: &SocialStates,
    topology: &NetworkTopology,
    agent: AgentId,
) -> Result<f64, ControllerError> {
    require_follower(topology, agent)?;
    let qi = states.get(agent);
    Ok(0.5
        * topology
            .neighbors(agent)
            .iter()
            .map(|&j| squared_distance(qi, states.get(j)))
            .sum::<f64>())
}

/// Half the product of edge margins. A nonpositive value means a bond has
/// already broken; callers decide how to treat it.
pub fn constraint_value(
    states: &SocialStates,
    topology: &NetworkTopology,
    agent: AgentId,
) -> Result<f64, ControllerError> {
    require_follower(topology, agent)?;
    let qi = states.get(agent);
    Ok(0.5
        * topology
            .neighbors(agent)
            .iter()
            .map(|&j| topology.delta() - squared_distance(qi, states.get(j)))
            .product::<f64>())
}

pub fn potential_value(gamma: f64, beta: f64, k: f64) -> Result<f64, ControllerError> {
    let denom = gamma.powf(k) + beta;
    if !(denom > 0.0) || (gamma == 0.0 && beta == 0.0) {
        return Err(ControllerError::UndefinedPoint { gamma, beta });
    }
    Ok(gamma / denom.powf(1.0 / k))
}

/// `m_ij = (k beta + bbar_ij gamma) / (k (gamma^k + beta)^(1/k + 1))`.
pub fn m_coefficient(gamma: f64, beta: f64, b_bar: f64, k: f64) -> Result<f64, ControllerError> {
    let base = gamma.powf(k) + beta;
    if !(base > 0.0) {
        return Err(ControllerError::UndefinedPoint { gamma, beta });
    }
    Ok((k * beta + b_bar * gamma) / (k * base.powf(1.0 / k + 1.0)))
}

/// `x^k`, exact and cheap for the common `k = 2`.
#[inline]
fn pow_k(x: f64, k: f64) -> f64 {
    if k == 2.0 {
        x * x
    } else {
        x.powf(k)
    }
}

/// Allocation-free core of [`breakdown`]: adds `grad phi_i` into `gradient`
/// (which must start zeroed) and reports each `m_ij` in neighbor order.
/// Returns `(gamma, beta, phi)`.
pub(crate) fn accumulate_gradient(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
    agent: AgentId,
    mut on_coefficient: impl FnMut(f64),
    gradient: &mut [f64],
) -> Result<(f64, f64, f64), ControllerError> {
    require_follower(topology, agent)?;
    const INLINE: usize = 32;
    let k = params.k;
    let delta = topology.delta();
    let qi = states.get(agent);
    let neighbors = topology.neighbors(agent);

    let mut inline = [0.0; INLINE];
    let mut heap = Vec::new();
    let margins: &mut [f64] = if neighbors.len() <= INLINE {
        &mut inline[..neighbors.len()]
    } else {
        heap.resize(neighbors.len(), 0.0);
        &mut heap
    };
    let mut gamma = 0.0;
    for (b, &j) in margins.iter_mut().zip(neighbors) {
        let s = squared_distance(qi, states.get(j));
        *b = delta - s;
        if *b < BARRIER_FLOOR * delta {
            return Err(ControllerError::BarrierBreach {
                follower: agent,
                neighbor: j,
                margin: *b,
            });
        }
        gamma += 0.5 * s;
    }
    let beta = 0.5 * margins.iter().product::<f64>();
    let base = pow_k(gamma, k) + beta;
    if !(base > 0.0) {
        return Err(ControllerError::UndefinedPoint { gamma, beta });
    }
    let root = base.powf(1.0 / k);
    let phi = gamma / root;
    let denom = k * base * root;
    for (idx, &j) in neighbors.iter().enumerate() {
        // product over the other neighbors; empty product is 1
        let b_bar: f64 = margins
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != idx)
            .map(|(_, b)| *b)
            .product();
        let m = (k * beta + b_bar * gamma) / denom;
        for (g, (a, b)) in gradient.iter_mut().zip(qi.iter().zip(states.get(j))) {
            *g += m * (a - b);
        }
        on_coefficient(m);
    }
    Ok((gamma, beta, phi))
}

/// Evaluates goal, constraint, potential, coefficients and gradient for a
/// follower, refusing configurations within the barrier floor.
pub fn breakdown(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
    agent: AgentId,
) -> Result<PotentialBreakdown, ControllerError> {
    let mut m_coeffs = Vec::with_capacity(topology.neighbors(agent).len());
    let mut gradient = vec![0.0; states.dim()];
    let (gamma, beta, phi) = accumulate_gradient(
        states,
        topology,
        params,
        agent,
        |m| m_coeffs.push(m),
        &mut gradient,
    )?;
    Ok(PotentialBreakdown {
        gamma,
        beta,
        phi,
        m_coeffs,
        neighbors: topology.neighbors(agent).to_vec(),
        gradient,
    })
}

/// `grad phi_i = sum_j m_ij (q_i - q_j)`.
pub fn potential_gradient(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
    agent: AgentId,
) -> Result<Vec<f64>, ControllerError> {
    Ok(breakdown(states, topology, params, agent)?.gradient)
}

/// Gradient from the unexpanded quotient rule,
/// `(k beta grad gamma - gamma grad beta) / (k (gamma^k + beta)^(1/k+1))`,
/// with `grad beta = -sum_j bbar_ij (q_i - q_j)`.
pub fn gradient_quotient_form(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
    agent: AgentId,
) -> Result<Vec<f64>, ControllerError> {
    let gamma = goal_value(states, topology, agent)?;
    let beta = constraint_value(states, topology, agent)?;
    let k = params.k;
    let qi = states.get(agent);
    let neighbors = topology.neighbors(agent);
    let dim = qi.len();
    let mut grad_gamma = vec![0.0; dim];
    let mut grad_beta = vec![0.0; dim];
    for &j in neighbors {
        let qj = states.get(j);
        let b_bar: f64 = neighbors
            .iter()
            .filter(|&&l| l != j)
            .map(|&l| topology.delta() - squared_distance(qi, states.get(l)))
            .product();
        for c in 0..dim {
            let d = qi[c] - qj[c];
            grad_gamma[c] += d;
            grad_beta[c] -= b_bar * d;
        }
    }
    let base = gamma.powf(k) + beta;
    if !(base > 0.0) {
        return Err(ControllerError::UndefinedPoint { gamma, beta });
    }
    let denom = k * base.powf(1.0 / k + 1.0);
    Ok((0..dim)
        .map(|c| (k * beta * grad_gamma[c] - gamma * grad_beta[c]) / denom)
        .collect())
}

/// `u_i = -K_i grad phi_i` for followers, zero for leaders.
pub fn control_input(
    states: &SocialStates,
    topology: &NetworkTopology,
    params: &ControllerParams,
    agent: AgentId,
) -> Result<Vec<f64>, ControllerError> {
    let Some(row) = topology.follower_row(agent) else {
        return Ok(vec![0.0; states.dim()]);
    };
    let gain = params.gain(row);
    Ok(potential_gradient(states, topology, params, agent)?
        .into_iter()
        .map(|g| -gain * g)
        .collect())
}
