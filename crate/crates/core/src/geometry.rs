//! Convex hulls of small point sets in one to three dimensions.
//!
//! Points are first reduced to their affine hull, so collinear or coplanar
//! input collapses to a lower-dimensional hull (segment, polygon) that still
//! answers distance queries in the ambient space.

use thiserror::Error;

use crate::graph::SocialStates;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("exact hulls are only supported up to three dimensions, got {0}")]
    UnsupportedDimension(usize),
    #[error("point has dimension {found}, hull has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no points given")]
    Empty,
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
}

/// Relative tolerance for rank and visibility decisions.
const REL_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    dim: usize,
    origin: Vec<f64>,
    /// Orthonormal basis of the affine hull; its length is the intrinsic
    /// dimension.
    basis: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
    local: Vec<Vec<f64>>,
    faces: Vec<[usize; 3]>,
}

impl ConvexHull {
    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the affine hull: 0 for a point, 1 for a segment, ...
    pub fn intrinsic_dim(&self) -> usize {
        self.basis.len()
    }

    /// Extreme points. A segment lists its two ends (low to high), a polygon
    /// runs counterclockwise in its own plane.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Outward-oriented triangles (indices into [`vertices`](Self::vertices))
    /// for full-dimensional 3-d hulls; empty otherwise.
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    fn to_local(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let w: Vec<f64> = p.iter().zip(&self.origin).map(|(a, o)| a - o).collect();
        let y: Vec<f64> = self.basis.iter().map(|e| dot(&w, e)).collect();
        let mut r = w;
        for (e, c) in self.basis.iter().zip(&y) {
            for (ri, ei) in r.iter_mut().zip(e) {
                *ri -= c * ei;
            }
        }
        (y, norm(&r))
    }

    /// Euclidean distance from `p` to the hull (0 inside).
    pub fn distance(&self, p: &[f64]) -> Result<f64, GeometryError> {
        if p.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        let (y, off) = self.to_local(p);
        let inner = match self.basis.len() {
            0 => 0.0,
            1 => {
                let (lo, hi) = (self.local[0][0], self.local[self.local.len() - 1][0]);
                (lo - y[0]).max(y[0] - hi).max(0.0)
            }
            2 => polygon_distance(&self.local, &y),
            _ => polyhedron_distance(&self.local, &self.faces, &y),
        };
        Ok(inner.hypot(off))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn cross2(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Greedy Gram–Schmidt over the point offsets. A full-rank set keeps the
/// identity frame so coordinates are not perturbed by rotation.
fn affine_frame(points: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let origin = points[0].to_vec();
    let scale = points
        .iter()
        .map(|p| norm(&sub(p, &origin)))
        .fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return (origin, basis);
    }
    while basis.len() < dim {
        let mut best = (0.0, Vec::new());
        for p in points {
            let mut r = sub(p, &origin);
            for e in &basis {
                let c = dot(&r, e);
                for (ri, ei) in r.iter_mut().zip(e) {
                    *ri -= c * ei;
                }
            }
            let n = norm(&r);
            if n > best.0 {
                best = (n, r);
            }
        }
        if best.0 <= REL_EPS * scale {
            break;
        }
        let n = best.0;
        basis.push(best.1.into_iter().map(|v| v / n).collect());
    }
    if basis.len() == dim {
        let identity = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        return (vec![0.0; dim], identity);
    }
    (origin, basis)
}

/// Minimal extreme-point hull of `points`, all of dimension 1 to 3.
pub fn convex_hull(points: &[Vec<f64>]) -> Result<ConvexHull, GeometryError> {
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    hull_of(&refs)
}

pub(crate) fn hull_of(points: &[&[f64]]) -> Result<ConvexHull, GeometryError> {
    let first = points.first().ok_or(GeometryError::Empty)?;
    let dim = first.len();
    if dim == 0 || dim > 3 {
        return Err(GeometryError::UnsupportedDimension(dim));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
    }
    let (origin, basis) = affine_frame(points, dim);
    let local_all: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let w = sub(p, &origin);
            basis.iter().map(|e| dot(&w, e)).collect()
        })
        .collect();
    let (order, faces) = match basis.len() {
        0 => (vec![0], Vec::new()),
        1 => {
            let lo = (0..points.len()).min_by(|&a, &b| local_all[a][0].total_cmp(&local_all[b][0]));
            let hi = (0..points.len()).max_by(|&a, &b| local_all[a][0].total_cmp(&local_all[b][0]));
            (vec![lo.unwrap_or(0), hi.unwrap_or(0)], Vec::new())
        }
        2 => (monotone_chain(&local_all), Vec::new()),
        _ => hull3(&local_all),
    };
    Ok(ConvexHull {
        dim,
        vertices: order.iter().map(|&i| points[i].to_vec()).collect(),
        local: order.iter().map(|&i| local_all[i].clone()).collect(),
        origin,
        basis,
        faces,
    })
}

/// Andrew's monotone chain; collinear boundary points are dropped.
fn monotone_chain(pts: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a][0]
            .total_cmp(&pts[b][0])
            .then(pts[a][1].total_cmp(&pts[b][1]))
    });
    idx.dedup_by(|a, b| pts[*a] == pts[*b]);
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross2(
                    &pts[hull[hull.len() - 2]],
                    &pts[hull[hull.len() - 1]],
                    &pts[i],
                ) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

struct Face {
    v: [usize; 3],
    normal: [f64; 3],
    offset: f64,
}

impl Face {
    fn new(pts: &[Vec<f64>], v: [usize; 3]) -> Face {
        let n = cross3(&sub(&pts[v[1]], &pts[v[0]]), &sub(&pts[v[2]], &pts[v[0]]));
        let len = norm(&n);
        let normal = [n[0] / len, n[1] / len, n[2] / len];
        Face {
            v,
            normal,
            offset: dot(&normal, &pts[v[0]]),
        }
    }

    fn height(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }
}

/// Incremental 3-d hull over full-rank input, followed by removal of vertices
/// that only touch one or two facet planes (points inside a facet or on an
/// edge).
fn hull3(pts: &[Vec<f64>]) -> (Vec<usize>, Vec<[usize; 3]>) {
    let mut active: Vec<usize> = (0..pts.len()).collect();
    loop {
        let faces = incremental_hull3(pts, &active);
        let used: Vec<usize> = {
            let mut u: Vec<usize> = faces.iter().flat_map(|f| f.v).collect();
            u.sort_unstable();
            u.dedup();
            u
        };
        let extreme: Vec<usize> = used
            .iter()
            .copied()
            .filter(|&v| {
                let mut planes: Vec<[f64; 3]> = Vec::new();
                for f in faces.iter().filter(|f| f.v.contains(&v)) {
                    if !planes
                        .iter()
                        .any(|n| (0..3).all(|c| (n[c] - f.normal[c]).abs() < 1e-9))
                    {
                        planes.push(f.normal);
                    }
                }
                planes.len() >= 3
            })
            .collect();
        if extreme.len() == used.len() {
            let remap = |i: usize| used.binary_search(&i).unwrap_or(0);
            return (
                used.clone(),
                faces
                    .iter()
                    .map(|f| [remap(f.v[0]), remap(f.v[1]), remap(f.v[2])])
                    .collect(),
            );
        }
        active = extreme;
    }
}

fn incremental_hull3(pts: &[Vec<f64>], active: &[usize]) -> Vec<Face> {
    let scale = active
        .iter()
        .map(|&i| norm(&sub(&pts[i], &pts[active[0]])))
        .fold(0.0, f64::max);
    let eps = REL_EPS * scale;
    // initial tetrahedron from successive extremes
    let a = active[0];
    let far = |f: &dyn Fn(usize) -> f64| {
        active
            .iter()
            .copied()
            .max_by(|&x, &y| f(x).total_cmp(&f(y)))
            .unwrap_or(a)
    };
    let b = far(&|i| norm(&sub(&pts[i], &pts[a])));
    let ab = sub(&pts[b], &pts[a]);
    let c = far(&|i| norm(&cross3(&ab, &sub(&pts[i], &pts[a]))));
    let n = cross3(&ab, &sub(&pts[c], &pts[a]));
    let d = far(&|i| dot(&n, &sub(&pts[i], &pts[a])).abs());
    let centroid: Vec<f64> = (0..3)
        .map(|k| (pts[a][k] + pts[b][k] + pts[c][k] + pts[d][k]) / 4.0)
        .collect();
    let oriented = |v: [usize; 3]| {
        let f = Face::new(pts, v);
        if f.height(&centroid) > 0.0 {
            Face::new(pts, [v[0], v[2], v[1]])
        } else {
            f
        }
    };
    let mut faces: Vec<Face> = [[a, b, c], [a, b, d], [a, c, d], [b, c, d]]
        .into_iter()
        .map(oriented)
        .collect();
    for &p in active {
        if [a, b, c, d].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| f.height(&pts[p]) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
            let [x, y, z] = f.v;
            edges.extend([(x, y), (y, z), (z, x)]);
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(x, y)| !edges.contains(&(y, x)))
            .collect();
        let mut keep = visible.iter().map(|v| !v);
        faces.retain(|_| keep.next().unwrap_or(true));
        faces.extend(horizon.into_iter().map(|(x, y)| Face::new(pts, [x, y, p])));
    }
    faces
}

fn segment_distance(a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 {
        (dot(&ap, &ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let closest: Vec<f64> = a.iter().zip(&ab).map(|(x, d)| x + t * d).collect();
    norm(&sub(p, &closest))
}

fn polygon_distance(poly: &[Vec<f64>], p: &[f64]) -> f64 {
    let n = poly.len();
    if (0..n).all(|i| cross2(&poly[i], &poly[(i + 1) % n], p) >= 0.0) {
        return 0.0;
    }
    (0..n)
        .map(|i| segment_distance(&poly[i], &poly[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

/// Closest-point-on-triangle distance (Voronoi-region walk).
fn triangle_distance(a: &[f64], b: &[f64], c: &[f64], p: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(&ap);
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return norm(&bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return segment_distance(a, b, p);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return norm(&cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return segment_distance(a, c, p);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return segment_distance(b, c, p);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let closest: Vec<f64> = (0..3).map(|k| a[k] + ab[k] * v + ac[k] * w).collect();
    norm(&sub(p, &closest))
}

fn polyhedron_distance(verts: &[Vec<f64>], faces: &[[usize; 3]], p: &[f64]) -> f64 {
    let outside = faces.iter().any(|f| Face::new(verts, *f).height(p) > 0.0);
    if !outside {
        return 0.0;
    }
    faces
        .iter()
        .map(|f| triangle_distance(&verts[f[0]], &verts[f[1]], &verts[f[2]], p))
        .fold(f64::INFINITY, f64::min)
}

/// Outcome of a containment query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullMembership {
    pub distance: f64,
    pub inside: bool,
}

/// Distance from `point` to `hull`; within `tol` counts as inside.
pub fn point_in_hull(
    point: &[f64],
    hull: &ConvexHull,
    tol: f64,
) -> Result<HullMembership, GeometryError> {
    let distance = hull.distance(point)?;
    Ok(HullMembership {
        distance,
        inside: distance <= tol,
    })
}

/// Lebesgue measure in the ambient dimension; 0 for degenerate hulls.
pub fn hull_volume(hull: &ConvexHull) -> Result<f64, GeometryError> {
    if hull.dim > 3 {
        return Err(GeometryError::UnsupportedDimension(hull.dim));
    }
    if hull.intrinsic_dim() < hull.dim {
        return Ok(0.0);
    }
    let v = &hull.local;
    Ok(match hull.dim {
        1 => v[v.len() - 1][0] - v[0][0],
        2 => {
            let n = v.len();
            0.5 * (0..n)
                .map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1])
                .sum::<f64>()
        }
        _ => {
            let o = &v[0];
            hull.faces
                .iter()
                .map(|f| {
                    let a = sub(&v[f[0]], o);
                    dot(&a, &cross3(&sub(&v[f[1]], o), &sub(&v[f[2]], o)))
                })
                .sum::<f64>()
                / 6.0
        }
    })
}

/// Coordinate-wise `max - min` over all agents.
pub fn spread(states: &SocialStates) -> Vec<f64> {
    let mut lo = vec![f64::INFINITY; states.dim()];
    let mut hi = vec![f64::NEG_INFINITY; states.dim()];
    for q in states.iter() {
        for (c, v) in q.iter().enumerate() {
            lo[c] = lo[c].min(*v);
            hi[c] = hi[c].max(*v);
        }
    }
    hi.iter().zip(&lo).map(|(h, l)| h - l).collect()
}
