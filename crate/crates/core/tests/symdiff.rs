mod common;

use common::{smooth_polygon, vertex_clearance};
use elastic_match::geometry::{BBox, Point, Polygon, PolygonSet};
use elastic_match::symdiff::{area_at, default_step, gradient, restoring_force, DeformedBoundary};
use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit square with `n` nodes per side.
fn sampled_square(n: usize) -> Polygon {
    let mut coords = Vec::new();
    for side in 0..4 {
        for i in 0..n {
            let s = i as f64 / n as f64;
            coords.push(match side {
                0 => [s, 0.0],
                1 => [1.0, s],
                2 => [1.0 - s, 1.0],
                _ => [0.0, 1.0 - s],
            });
        }
    }
    Polygon::from_coords(&coords)
}

/// A smooth source with a small random displacement and an overlapping
/// smooth target.
fn random_configuration(rng: &mut ChaCha8Rng) -> (DeformedBoundary, PolygonSet) {
    let k = rng.gen_range(24..64);
    let base = smooth_polygon(rng, Point::origin(), 0.5, k);
    let c = Point::new(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
    let kt = rng.gen_range(20..60);
    let target = PolygonSet::from_polygon(smooth_polygon(rng, c, 0.45, kt));
    let u = DVector::from_fn(2 * k, |_, _| rng.gen_range(-0.005..0.005));
    (DeformedBoundary::new(base, u).unwrap(), target)
}

fn displaced(db: &DeformedBoundary, delta: &DVector<f64>) -> DeformedBoundary {
    DeformedBoundary::new(db.base().clone(), db.displacement() + delta).unwrap()
}

fn joint_diagonal(db: &DeformedBoundary, target: &PolygonSet) -> f64 {
    let bb: BBox = db.ring().bbox().unwrap().union(&target.bbox().unwrap());
    bb.diagonal()
}

/// Full 2-component central differences with step `h / 2` at node `i`.
fn central_difference(db: &DeformedBoundary, target: &PolygonSet, i: usize, h: f64) -> Vector2<f64> {
    let mut g = Vector2::zeros();
    for j in 0..2 {
        let mut e = DVector::zeros(db.displacement().len());
        e[2 * i + j] = h / 2.0;
        let up = area_at(&displaced(db, &e), target).unwrap();
        let down = area_at(&displaced(db, &-e), target).unwrap();
        g[j] = (up - down) / h;
    }
    g
}

#[test]
fn shifted_square_matches_analytic_derivatives() {
    let n = 10;
    let spacing = 1.0 / n as f64;
    let source = sampled_square(n);
    let target = PolygonSet::from_polygon(sampled_square(n).translated(Vector2::new(0.2, 0.0)));
    let db = DeformedBoundary::undeformed(source);
    let g = gradient(&db, &target, default_step(&db, &target)).unwrap();
    let force = restoring_force(&g);
    for i in 1..n {
        // Right side: the new sliver lies inside the target.
        let right = n + i;
        assert!((g.d[right] + spacing).abs() <= 1e-6, "right node {right}: {}", g.d[right]);
        assert!(force[2 * right] > 0.0 && force[2 * right + 1].abs() <= 1e-9);
        // Left side: the sliver lies outside.
        let left = 3 * n + i;
        assert!((g.d[left] - spacing).abs() <= 1e-6, "left node {left}: {}", g.d[left]);
    }
}

#[test]
fn gradient_spends_k_plus_one_clips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (db, target) = random_configuration(&mut rng);
    let g = gradient(&db, &target, 1e-3).unwrap();
    assert_eq!(g.clip_calls, db.num_nodes() + 1);
    assert_eq!(g.d.len(), db.num_nodes());
}

#[test]
fn perfect_overlap_is_a_minimum() {
    let hexagon = Polygon::new((0..6).map(|i| Point::new((i as f64).cos(), (i as f64).sin())).collect());
    for p in [sampled_square(5), hexagon] {
        let db = DeformedBoundary::undeformed(p.clone());
        let g = gradient(&db, &PolygonSet::from_polygon(p), 1e-4).unwrap();
        assert_eq!(g.area, 0.0);
        assert!(g.d.iter().all(|&d| d >= 0.0), "{:?}", g.d);
    }
}

#[test]
fn tangential_part_of_the_gradient_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (db, target) = random_configuration(&mut rng);
    let g = gradient(&db, &target, 1e-4).unwrap();
    for i in 0..db.num_nodes() {
        let gi = Vector2::new(g.g[2 * i], g.g[2 * i + 1]);
        let n = g.normals[i];
        assert!((gi - gi.dot(&n) * n).norm() <= 1e-15);
        assert!((n.norm() - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn normal_reduction_matches_full_central_differences() {
    // The comparison isolates the normal reduction from finite-difference
    // bias, so both sides use a fine step.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let (db, target) = random_configuration(&mut rng);
        let h = 1e-6 * joint_diagonal(&db, &target);
        let g = gradient(&db, &target, h).unwrap();
        let dmax = g.d.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for i in 0..db.num_nodes() {
            let normal = central_difference(&db, &target, i, h).dot(&g.normals[i]);
            let tol = (0.05 * g.d[i].abs()).max(1e-3 * dmax);
            assert!((normal - g.d[i]).abs() <= tol, "case {case} node {i}: {normal} vs {}", g.d[i]);
        }
    }
}

#[test]
fn tangential_derivative_shrinks_with_sampling() {
    // The full gradient has a tangential part at polygon corners that
    // shrinks with the turning angle, i.e. linearly in the node spacing.
    let mut worst = Vec::new();
    for k in [32, 128] {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = smooth_polygon(&mut rng, Point::origin(), 0.5, k);
        let target = PolygonSet::from_polygon(smooth_polygon(&mut rng, Point::new(0.1, 0.05), 0.45, 200));
        let db = DeformedBoundary::undeformed(base);
        let h = 1e-6 * joint_diagonal(&db, &target);
        let g = gradient(&db, &target, h).unwrap();
        let dmax = g.d.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let tangential = (0..k)
            .map(|i| {
                let full = central_difference(&db, &target, i, h);
                (full - full.dot(&g.normals[i]) * g.normals[i]).norm()
            })
            .fold(0.0f64, f64::max);
        worst.push(tangential / dmax);
    }
    assert!(worst[1] <= 0.5 * worst[0], "{worst:?}");
}

#[test]
fn affine_model_has_quadratic_remainder() {
    // Normal displacements of decreasing size: the error of the affine model
    // should drop by four per halving. The difference step sits near the
    // square root of the snapping quantum, balancing noise against bias.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = 0.001;
    for case in 0..50 {
        // Crossings inside the probe range would switch quadratics.
        let (db, target) = loop {
            let (db, target) = random_configuration(&mut rng);
            if vertex_clearance(db.ring(), target.outers().next().unwrap()) > eps {
                break (db, target);
            }
        };
        let k = db.num_nodes();
        let g = gradient(&db, &target, 1e-5 * joint_diagonal(&db, &target)).unwrap();
        let freq = rng.gen_range(1..5) as f64;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let profile: Vec<f64> = (0..k).map(|i| (freq * std::f64::consts::TAU * i as f64 / k as f64 + phase).sin()).collect();
        let remainder = |eps: f64| {
            let delta = DVector::from_iterator(2 * k, (0..k).flat_map(|i| [eps * profile[i] * g.normals[i].x, eps * profile[i] * g.normals[i].y]));
            (area_at(&displaced(&db, &delta), &target).unwrap() - g.area - g.g.dot(&delta)).abs()
        };
        let ratio = remainder(eps / 2.0) / remainder(eps);
        assert!((0.2..=0.35).contains(&ratio), "case {case}: ratio {ratio}");
    }
}

#[test]
fn gradient_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (db, target) = random_configuration(&mut rng);
    let a = gradient(&db, &target, 1e-3).unwrap();
    let b = gradient(&db, &target, 1e-3).unwrap();
    assert_eq!(a.g, b.g);
}

#[test]
fn self_intersecting_ring_is_flagged_but_evaluated() {
    let square = sampled_square(1);
    // Swap two corners to make a bow-tie.
    let u = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
    let db = DeformedBoundary::new(square.clone(), u).unwrap();
    assert!(!db.is_valid());
    let area = area_at(&db, &PolygonSet::from_polygon(square)).unwrap();
    // The even–odd bow-tie covers two of the four quarter triangles.
    assert!((area - 0.5).abs() <= 1e-12);
}
