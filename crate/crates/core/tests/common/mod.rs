//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use containment::graph::{AgentRole, NetworkTopology, SocialStates};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `phi = gamma / (gamma^k + beta)^(1/k)` straight from the definitions.
pub fn phi_oracle(qi: &[f64], neighbors: &[Vec<f64>], delta: f64, k: f64) -> f64 {
    let s: Vec<f64> = neighbors
        .iter()
        .map(|q| q.iter().zip(qi).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let gamma = 0.5 * s.iter().sum::<f64>();
    let beta = 0.5 * s.iter().map(|v| delta - v).product::<f64>();
    gamma / (gamma.powf(k) + beta).powf(1.0 / k)
}

/// Central finite-difference gradient of [`phi_oracle`] in `qi`.
pub fn phi_gradient_fd(qi: &[f64], neighbors: &[Vec<f64>], delta: f64, k: f64, h: f64) -> Vec<f64> {
    (0..qi.len())
        .map(|c| {
            let mut plus = qi.to_vec();
            let mut minus = qi.to_vec();
            plus[c] += h;
            minus[c] -= h;
            (phi_oracle(&plus, neighbors, delta, k) - phi_oracle(&minus, neighbors, delta, k))
                / (2.0 * h)
        })
        .collect()
}

/// One follower (agent 0) observing `m` leaders placed inside the threshold.
pub struct StarConfig {
    pub topology: NetworkTopology,
    pub states: SocialStates,
    pub k: f64,
}

pub fn random_star(rng: &mut ChaCha8Rng) -> StarConfig {
    let dim = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=5);
    let delta: f64 = rng.gen_range(0.5..4.0);
    let k = [1.0, 2.0, 3.0, 1.5][rng.gen_range(0..4)];
    let qi: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut states = vec![qi.clone()];
    while states.len() < m + 1 {
        let q: Vec<f64> = qi
            .iter()
            .map(|v| v + rng.gen_range(-1.0..1.0) * delta.sqrt())
            .collect();
        let s: f64 = q.iter().zip(&qi).map(|(a, b)| (a - b) * (a - b)).sum();
        // keep clear of both the barrier and exact consensus
        if s < 0.9 * delta && s > 1e-3 * delta {
            states.push(q);
        }
    }
    let mut roles = vec![AgentRole::Follower];
    roles.extend(std::iter::repeat_n(AgentRole::Leader, m));
    StarConfig {
        topology: NetworkTopology::new(roles, (1..=m).map(|j| (0, j)).collect(), delta).unwrap(),
        states: SocialStates::new(states).unwrap(),
        k,
    }
}

pub fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Hull vertices of points in general position: `(i, j)` is a hull edge when
/// every other point lies strictly on one side. O(n^3).
pub fn extreme_points_2d(p: &[Vec<f64>]) -> Vec<usize> {
    let n = p.len();
    let mut out = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if (0..n)
                .filter(|&l| l != i && l != j)
                .all(|l| cross(&p[i], &p[j], &p[l]) > 0.0)
            {
                out[i] = true;
                out[j] = true;
            }
        }
    }
    (0..n).filter(|&i| out[i]).collect()
}

fn sub3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Facets of a 3-d point set in general position: triples with every other
/// point strictly on one side. Returns the vertex set and the facets.
pub fn extreme_points_3d(p: &[Vec<f64>]) -> (Vec<usize>, Vec<[usize; 3]>) {
    let n = p.len();
    let mut used = vec![false; n];
    let mut facets = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                let side =
                    |x: usize| det3(sub3(&p[j], &p[i]), sub3(&p[l], &p[i]), sub3(&p[x], &p[i]));
                let others: Vec<f64> = (0..n)
                    .filter(|&x| x != i && x != j && x != l)
                    .map(side)
                    .collect();
                if others.iter().all(|s| *s < 0.0) || others.iter().all(|s| *s > 0.0) {
                    used[i] = true;
                    used[j] = true;
                    used[l] = true;
                    facets.push([i, j, l]);
                }
            }
        }
    }
    ((0..n).filter(|&i| used[i]).collect(), facets)
}

/// Volume from facets as tetrahedra against an interior point.
pub fn volume_from_facets(p: &[Vec<f64>], facets: &[[usize; 3]]) -> f64 {
    let n = p.len() as f64;
    let c: Vec<f64> = (0..3)
        .map(|k| p.iter().map(|q| q[k]).sum::<f64>() / n)
        .collect();
    facets
        .iter()
        .map(|f| det3(sub3(&p[f[0]], &c), sub3(&p[f[1]], &c), sub3(&p[f[2]], &c)).abs() / 6.0)
        .sum()
}

/// Shoelace area after ordering the vertices by angle about their mean.
pub fn shoelace(vertices: &[Vec<f64>]) -> f64 {
    let n = vertices.len() as f64;
    let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / n;
    let mut v = vertices.to_vec();
    v.sort_by(|a, b| {
        (a[1] - cy)
            .atan2(a[0] - cx)
            .total_cmp(&(b[1] - cy).atan2(b[0] - cx))
    });
    let m = v.len();
    0.5 * (0..m)
        .map(|i| v[i][0] * v[(i + 1) % m][1] - v[(i + 1) % m][0] * v[i][1])
        .sum::<f64>()
        .abs()
}

/// Barycentric membership in triangle `t`; returns the smallest coordinate.
pub fn barycentric_min(t: &[Vec<f64>; 3], p: &[f64]) -> f64 {
    let d = cross(&t[0], &t[1], &t[2]);
    let l0 = cross(p, &t[1], &t[2]) / d;
    let l1 = cross(&t[0], p, &t[2]) / d;
    let l2 = 1.0 - l0 - l1;
    l0.min(l1).min(l2)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Uniform points in the unit disk.
pub fn random_disk(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (x, y): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if x * x + y * y <= 1.0 {
            out.push(vec![x, y]);
        }
    }
    out
}
