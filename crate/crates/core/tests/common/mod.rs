//! Shared generators and oracles for the integration tests.

#![allow(dead_code)]

use elastic_match::geometry::{Point, Polygon, PolygonSet};
use elastic_match::meshing::{triangulate, MeshParams, TriMesh};
use rand::Rng;

/// Random polygon that is star-shaped with respect to `center`, hence
/// simple. Angular gaps stay below π so `center` is inside.
pub fn random_star_polygon<R: Rng>(rng: &mut R, center: Point, n: usize, rmin: f64, rmax: f64) -> Polygon {
    let tau = std::f64::consts::TAU;
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..tau)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let max_gap = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(angles.first().zip(angles.last()).map(|(f, l)| f + tau - l))
        .fold(0.0, f64::max);
    if angles.len() < 3 || max_gap >= 0.9 * std::f64::consts::PI {
        let k = n.max(3);
        let phase = rng.gen_range(0.0..tau);
        angles = (0..k).map(|i| phase + tau * (i as f64 + rng.gen_range(0.0..0.5)) / k as f64).collect();
    }
    Polygon::new(
        angles
            .iter()
            .map(|&t| {
                let r = rng.gen_range(rmin..rmax);
                Point::new(center.x + r * t.cos(), center.y + r * t.sin())
            })
            .collect(),
    )
}

pub fn random_shape<R: Rng>(rng: &mut R) -> PolygonSet {
    let c = Point::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
    let n = rng.gen_range(3..40);
    random_star_polygon(rng, c, n, 0.2, 1.0).into()
}

/// Even–odd crossings of the horizontal line `y` with all rings of `s`.
fn row_crossings(s: &PolygonSet, y: f64, out: &mut Vec<f64>) {
    out.clear();
    for ring in &s.rings {
        for (a, b) in ring.polygon.edges() {
            if (a.y > y) != (b.y > y) {
                out.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
    }
    out.sort_by(f64::total_cmp);
}

/// Area of A △ B by counting pixel centres of a `res × res` grid over the
/// joint bounding box whose inside-ness differs.
pub fn raster_symdiff(a: &PolygonSet, b: &PolygonSet, res: usize) -> f64 {
    let bb = match (a.bbox(), b.bbox()) {
        (Some(x), Some(y)) => x.union(&y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => return 0.0,
    };
    let w = (bb.max.x - bb.min.x) / res as f64;
    let h = (bb.max.y - bb.min.y) / res as f64;
    // Number of pixel centres strictly left of x.
    let k = |x: f64| -> i64 { (((x - bb.min.x) / w - 0.5).ceil() as i64).clamp(0, res as i64) };
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    let mut events: Vec<(i64, u8)> = Vec::new();
    let mut count: i64 = 0;
    for row in 0..res {
        let y = bb.min.y + (row as f64 + 0.5) * h;
        row_crossings(a, y, &mut xa);
        row_crossings(b, y, &mut xb);
        events.clear();
        events.extend(xa.iter().map(|&x| (k(x), 1u8)));
        events.extend(xb.iter().map(|&x| (k(x), 2u8)));
        events.sort();
        let mut state = 0u8;
        let mut last = 0;
        for &(pos, bit) in &events {
            if state == 1 || state == 2 {
                count += pos - last;
            }
            state ^= bit;
            last = pos;
        }
    }
    count as f64 * w * h
}

/// Random star-shaped domain meshed to roughly `triangles` triangles.
pub fn random_mesh<R: Rng>(rng: &mut R, triangles: usize) -> TriMesh {
    let k = ((triangles as f64).sqrt() * 1.5) as usize + 3;
    let p = random_star_polygon(rng, Point::origin(), k, 0.35, 0.5);
    let params = MeshParams {
        max_triangle_area: p.signed_area() / (0.6 * triangles as f64),
        min_angle_deg: 25.0,
    };
    triangulate(&p, &params).expect("random star polygons mesh")
}

/// Smooth closed curve `r(θ) = radius (1 + Σ a_j cos(jθ + φ_j))` with small
/// low-frequency modes, sampled at `k` uniform angles.
pub fn smooth_polygon<R: Rng>(rng: &mut R, center: Point, radius: f64, k: usize) -> Polygon {
    let modes: Vec<(f64, f64)> = (2..5).map(|_| (rng.gen_range(-0.08..0.08), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    Polygon::new(
        (0..k)
            .map(|i| {
                let t = phase + std::f64::consts::TAU * i as f64 / k as f64;
                let r = radius * (1.0 + modes.iter().enumerate().map(|(j, (a, p))| a * ((j + 2) as f64 * t + p).cos()).sum::<f64>());
                Point::new(center.x + r * t.cos(), center.y + r * t.sin())
            })
            .collect(),
    )
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

/// Smallest distance from a vertex of either polygon to an edge of the
/// other. Moving every vertex by less than this changes no crossing, so
/// the symmetric-difference area stays a single quadratic.
pub fn vertex_clearance(a: &Polygon, b: &Polygon) -> f64 {
    let one_way = |p: &Polygon, q: &Polygon| {
        p.vertices()
            .iter()
            .flat_map(|&v| q.edges().map(move |(s, e)| segment_distance(v, s, e)))
            .fold(f64::INFINITY, f64::min)
    };
    one_way(a, b).min(one_way(b, a))
}
