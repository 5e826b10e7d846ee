mod common;

use common::{
    barycentric_min, extreme_points_2d, extreme_points_3d, random_disk, random_points, shoelace,
    volume_from_facets,
};
use containment::geometry::{convex_hull, hull_volume, point_in_hull};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[test]
fn hull_vertices_match_brute_force_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..250 {
        let n = rng.gen_range(3..30);
        let pts = if case % 5 == 0 {
            random_disk(&mut rng, 100)
        } else {
            random_points(&mut rng, n, 2)
        };
        let hull = convex_hull(&pts).unwrap();
        let expected = sorted(
            extreme_points_2d(&pts)
                .into_iter()
                .map(|i| pts[i].clone())
                .collect(),
        );
        assert_eq!(sorted(hull.vertices().to_vec()), expected, "case {case}");
    }
}

#[test]
fn hull_vertices_match_brute_force_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..200 {
        let n = rng.gen_range(4..14);
        let pts = random_points(&mut rng, n, 3);
        let hull = convex_hull(&pts).unwrap();
        let (idx, facets) = extreme_points_3d(&pts);
        let expected = sorted(idx.into_iter().map(|i| pts[i].clone()).collect());
        assert_eq!(sorted(hull.vertices().to_vec()), expected, "case {case}");
        let v = hull_volume(&hull).unwrap();
        let oracle = volume_from_facets(&pts, &facets);
        assert!(
            (v - oracle).abs() <= 1e-12 * oracle.max(1.0),
            "case {case}: {v} vs {oracle}"
        );
    }
}

#[test]
fn membership_matches_barycentric_test_on_triangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    for _ in 0..200 {
        let t = random_points(&mut rng, 3, 2);
        let tri = [t[0].clone(), t[1].clone(), t[2].clone()];
        let area = 0.5 * common::cross(&t[0], &t[1], &t[2]).abs();
        if area < 1e-3 {
            continue;
        }
        let hull = convex_hull(&t).unwrap();
        for _ in 0..200 {
            let p = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
            let lam = barycentric_min(&tri, &p);
            if lam.abs() < 1e-9 {
                continue;
            }
            let m = point_in_hull(&p, &hull, 1e-12).unwrap();
            assert_eq!(m.inside, lam > 0.0, "{p:?} in {tri:?}");
            checked += 1;
        }
    }
    assert!(checked > 20_000);
}

#[test]
fn distance_matches_segment_oracle() {
    fn seg(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
    }
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..200 {
        let n = rng.gen_range(3..15);
        let pts = random_points(&mut rng, n, 2);
        let hull = convex_hull(&pts).unwrap();
        let v = hull.vertices().to_vec();
        let idx = extreme_points_2d(&pts);
        for _ in 0..20 {
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let d = hull.distance(&p).unwrap();
            if d == 0.0 {
                continue;
            }
            // outside: nearest point lies on some hull edge
            let oracle = idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| seg(&p, &pts[i], &pts[j]))
                .fold(f64::INFINITY, f64::min);
            assert!(
                (d - oracle).abs() <= 1e-12,
                "{d} vs {oracle} ({} vertices)",
                v.len()
            );
        }
    }
}

#[test]
fn area_matches_shoelace() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for case in 0..250 {
        let n = rng.gen_range(3..40);
        let pts = if case % 5 == 0 {
            random_disk(&mut rng, 100)
        } else {
            random_points(&mut rng, n, 2)
        };
        let hull = convex_hull(&pts).unwrap();
        let idx = extreme_points_2d(&pts);
        let oracle = shoelace(&idx.into_iter().map(|i| pts[i].clone()).collect::<Vec<_>>());
        let a = hull_volume(&hull).unwrap();
        assert!((a - oracle).abs() <= 1e-12, "case {case}: {a} vs {oracle}");
    }
}
