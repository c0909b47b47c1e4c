//! Ear clipping, Lawson flips to a constrained Delaunay triangulation, then
//! Bowyer–Watson refinement with interior Steiner points only.

use std::collections::HashSet;

use robust::Coord;

use super::{triangle_min_angle, MeshError, MeshParams, TriMesh};
use crate::geometry::{is_simple, Point, Polygon};

const NONE: usize = usize::MAX;
/// Hard cap on mesh nodes, whatever the area target.
const MAX_NODES: usize = 100_000;

fn coord(p: Point) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// Triangulates the interior of a simple CCW polygon. Nodes `0..n` are the
/// polygon vertices in order, so the boundary loop is `0..n`. The boundary is
/// never split: circumcenters that fall outside the domain or inside the
/// diametral circle of a boundary edge are not inserted, and such triangles
/// keep their small angles. Oversized triangles are split at the centroid
/// when the circumcenter is unavailable.
pub fn triangulate(p: &Polygon, params: &MeshParams) -> Result<TriMesh, MeshError> {
    if p.len() < 3 {
        return Err(MeshError::InvalidInput("polygon needs at least 3 vertices".into()));
    }
    if !(params.max_triangle_area > 0.0) {
        return Err(MeshError::InvalidInput("max_triangle_area must be positive".into()));
    }
    if !(params.min_angle_deg >= 0.0 && params.min_angle_deg < 60.0) {
        return Err(MeshError::InvalidInput("min_angle_deg must lie in [0, 60)".into()));
    }
    if p.vertices().iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(MeshError::InvalidInput("non-finite vertex".into()));
    }
    if !is_simple(p) {
        return Err(MeshError::InvalidInput("polygon is not simple".into()));
    }
    if p.signed_area() <= 0.0 {
        return Err(MeshError::InvalidInput("polygon must be counter-clockwise".into()));
    }
    let mut cdt = Cdt::new(p.vertices().to_vec());
    cdt.ear_clip()?;
    cdt.make_delaunay();
    cdt.refine(params)?;
    let k = p.len();
    let mesh = TriMesh {
        triangles: (0..cdt.tri.len()).filter(|&t| !cdt.dead[t]).map(|t| cdt.tri[t]).collect(),
        nodes: cdt.pts,
        boundary_loop: (0..k).collect(),
    };
    mesh.validate()?;
    Ok(mesh)
}

struct Cdt {
    pts: Vec<Point>,
    /// Number of boundary vertices; boundary edges are `(i, i+1 mod k)`.
    k: usize,
    tri: Vec<[usize; 3]>,
    /// `nbr[t][i]` is the triangle across the edge opposite `tri[t][i]`.
    nbr: Vec<[usize; 3]>,
    dead: Vec<bool>,
    free: Vec<usize>,
}

impl Cdt {
    fn new(pts: Vec<Point>) -> Self {
        Self {
            k: pts.len(),
            pts,
            tri: Vec::new(),
            nbr: Vec::new(),
            dead: Vec::new(),
            free: Vec::new(),
        }
    }

    fn orient(&self, a: usize, b: usize, c: Point) -> f64 {
        robust::orient2d(coord(self.pts[a]), coord(self.pts[b]), coord(c))
    }

    fn in_circumcircle(&self, t: usize, p: Point) -> bool {
        let [a, b, c] = self.tri[t].map(|i| coord(self.pts[i]));
        robust::incircle(a, b, c, coord(p)) > 0.0
    }

    fn alloc(&mut self, v: [usize; 3], n: [usize; 3]) -> usize {
        match self.free.pop() {
            Some(t) => {
                self.tri[t] = v;
                self.nbr[t] = n;
                self.dead[t] = false;
                t
            }
            None => {
                self.tri.push(v);
                self.nbr.push(n);
                self.dead.push(false);
                self.tri.len() - 1
            }
        }
    }

    /// Points the neighbour of `t` across edge `{a, b}` at `to`.
    fn relink(&mut self, t: usize, a: usize, b: usize, to: usize) {
        if t == NONE {
            return;
        }
        let i = (0..3).find(|&i| self.tri[t][i] != a && self.tri[t][i] != b).expect("edge belongs to triangle");
        self.nbr[t][i] = to;
    }

    fn ear_clip(&mut self) -> Result<(), MeshError> {
        let n = self.k;
        let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
        let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let mut remaining = n;
        let mut i = 0;
        let mut misses = 0;
        let mut tris = Vec::with_capacity(n - 2);
        while remaining > 3 {
            let (a, c) = (prev[i], next[i]);
            if self.is_ear(a, i, c, &next) {
                tris.push([a, i, c]);
                next[a] = c;
                prev[c] = a;
                remaining -= 1;
                i = c;
                misses = 0;
            } else {
                i = c;
                misses += 1;
                if misses > remaining {
                    let v = self.pts[i];
                    return Err(MeshError::Failure {
                        message: "no ear found".into(),
                        x: v.x,
                        y: v.y,
                    });
                }
            }
        }
        let last = [prev[i], i, next[i]];
        if self.orient(last[0], last[1], self.pts[last[2]]) <= 0.0 {
            let v = self.pts[i];
            return Err(MeshError::Failure {
                message: "degenerate final ear".into(),
                x: v.x,
                y: v.y,
            });
        }
        tris.push(last);
        self.build(tris);
        Ok(())
    }

    fn is_ear(&self, a: usize, b: usize, c: usize, next: &[usize]) -> bool {
        if self.orient(a, b, self.pts[c]) <= 0.0 {
            return false;
        }
        let mut v = next[c];
        while v != a {
            let q = self.pts[v];
            if self.orient(a, b, q) >= 0.0 && self.orient(b, c, q) >= 0.0 && self.orient(c, a, q) >= 0.0 {
                return false;
            }
            v = next[v];
        }
        true
    }

    fn build(&mut self, tris: Vec<[usize; 3]>) {
        let mut owner = std::collections::HashMap::new();
        for (t, v) in tris.iter().enumerate() {
            for i in 0..3 {
                owner.insert((v[(i + 1) % 3], v[(i + 2) % 3]), t);
            }
        }
        self.nbr = tris
            .iter()
            .map(|v| [0, 1, 2].map(|i| *owner.get(&(v[(i + 2) % 3], v[(i + 1) % 3])).unwrap_or(&NONE)))
            .collect();
        self.dead = vec![false; tris.len()];
        self.tri = tris;
    }

    fn make_delaunay(&mut self) {
        let stack: Vec<(usize, usize)> = (0..self.tri.len()).flat_map(|t| (0..3).map(move |i| (t, i))).collect();
        self.legalize(stack);
    }

    /// Lawson flips until every interior edge is locally Delaunay.
    fn legalize(&mut self, mut stack: Vec<(usize, usize)>) {
        while let Some((t1, i)) = stack.pop() {
            let t2 = self.nbr[t1][i];
            if self.dead[t1] || t2 == NONE {
                continue;
            }
            let (p, q, r) = (self.tri[t1][i], self.tri[t1][(i + 1) % 3], self.tri[t1][(i + 2) % 3]);
            let j = (0..3).find(|&j| self.nbr[t2][j] == t1).expect("adjacency is symmetric");
            let s = self.tri[t2][j];
            if !self.in_circumcircle(t1, self.pts[s]) {
                continue;
            }
            // The quad p, q, s, r is convex whenever s lies inside the
            // circumcircle of p, q, r; the orientation checks are a guard.
            if self.orient(p, q, self.pts[s]) <= 0.0 || self.orient(s, r, self.pts[p]) <= 0.0 {
                continue;
            }
            let n_pq = self.nbr[t1][(i + 2) % 3];
            let n_rp = self.nbr[t1][(i + 1) % 3];
            let n_qs = self.nbr[t2][(j + 1) % 3];
            let n_sr = self.nbr[t2][(j + 2) % 3];
            self.tri[t1] = [p, q, s];
            self.nbr[t1] = [n_qs, t2, n_pq];
            self.tri[t2] = [p, s, r];
            self.nbr[t2] = [n_sr, n_rp, t1];
            self.relink(n_qs, q, s, t1);
            self.relink(n_rp, r, p, t2);
            stack.extend([(t1, 0), (t1, 2), (t2, 0), (t2, 1)]);
        }
    }

    /// Walks from `start` towards `p`. `None` when the walk would cross the
    /// boundary, i.e. `p` is outside or not visible.
    fn locate(&self, start: usize, p: Point) -> Option<usize> {
        let mut t = start;
        for _ in 0..4 * self.tri.len() + 16 {
            let step = (0..3).find(|&i| self.orient(self.tri[t][(i + 1) % 3], self.tri[t][(i + 2) % 3], p) < 0.0);
            match step {
                None => return Some(t),
                Some(i) if self.nbr[t][i] == NONE => return None,
                Some(i) => t = self.nbr[t][i],
            }
        }
        None
    }

    fn encroaches_boundary(&self, p: Point) -> bool {
        (0..self.k).any(|i| {
            let (a, b) = (self.pts[i], self.pts[(i + 1) % self.k]);
            (a - p).dot(&(b - p)) <= 0.0
        })
    }

    /// Bowyer–Watson insertion of `p`, which must lie in triangle `t0`.
    /// Returns false, leaving the mesh untouched, if the cavity would not be
    /// star-shaped around `p`.
    fn insert(&mut self, t0: usize, p: Point) -> bool {
        if self.tri[t0].iter().any(|&v| self.pts[v] == p) {
            return false;
        }
        let mut inside = HashSet::from([t0]);
        let mut cavity = vec![t0];
        let mut stack = vec![t0];
        while let Some(t) = stack.pop() {
            for u in self.nbr[t] {
                if u != NONE && !inside.contains(&u) && self.in_circumcircle(u, p) {
                    inside.insert(u);
                    cavity.push(u);
                    stack.push(u);
                }
            }
        }
        let mut rim = Vec::new();
        for &t in &cavity {
            for i in 0..3 {
                let u = self.nbr[t][i];
                if u == NONE || !inside.contains(&u) {
                    rim.push((self.tri[t][(i + 1) % 3], self.tri[t][(i + 2) % 3], u));
                }
            }
        }
        if rim.iter().any(|&(a, b, _)| self.orient(a, b, p) <= 0.0) {
            return false;
        }
        let pv = self.pts.len();
        self.pts.push(p);
        for &t in &cavity {
            self.dead[t] = true;
            self.free.push(t);
        }
        let new: Vec<usize> = rim.iter().map(|&(a, b, u)| self.alloc([a, b, pv], [NONE, NONE, u])).collect();
        let mut starting_at = std::collections::HashMap::new();
        for (&(a, _, _), &t) in rim.iter().zip(&new) {
            starting_at.insert(a, t);
        }
        let mut ending_at = std::collections::HashMap::new();
        for (&(_, b, _), &t) in rim.iter().zip(&new) {
            ending_at.insert(b, t);
        }
        for (&(a, b, u), &t) in rim.iter().zip(&new) {
            self.nbr[t][0] = starting_at[&b];
            self.nbr[t][1] = ending_at[&a];
            self.relink(u, a, b, t);
        }
        true
    }

    fn refine(&mut self, params: &MeshParams) -> Result<(), MeshError> {
        let min_angle = params.min_angle_deg.to_radians();
        let area: f64 = (0..self.tri.len()).map(|t| self.area(t)).sum();
        let wanted = (area / params.max_triangle_area).ceil().min(MAX_NODES as f64) as usize;
        let budget = (20 * wanted + 11 * self.k + 1000).min(MAX_NODES);
        let mut exempt: HashSet<[usize; 3]> = HashSet::new();
        loop {
            let mut inserted = false;
            let mut t = 0;
            while t < self.tri.len() {
                if self.dead[t] || exempt.contains(&self.tri[t]) {
                    t += 1;
                    continue;
                }
                let [a, b, c] = self.tri[t].map(|i| self.pts[i]);
                let too_big = self.area(t) > params.max_triangle_area;
                let too_sharp = triangle_min_angle(a, b, c) < min_angle;
                if !too_big && !too_sharp {
                    t += 1;
                    continue;
                }
                if self.pts.len() >= budget {
                    let at = circumcenter(a, b, c);
                    return Err(MeshError::Failure {
                        message: format!("node budget of {budget} exhausted"),
                        x: at.x,
                        y: at.y,
                    });
                }
                let cc = circumcenter(a, b, c);
                let placed = cc.x.is_finite()
                    && cc.y.is_finite()
                    && !self.encroaches_boundary(cc)
                    && self.locate(t, cc).is_some_and(|host| self.insert(host, cc));
                if placed {
                    inserted = true;
                } else if too_big {
                    let g = Point::from((a.coords + b.coords + c.coords) / 3.0);
                    if !self.insert(t, g) {
                        return Err(MeshError::Failure {
                            message: "cannot split oversized triangle".into(),
                            x: g.x,
                            y: g.y,
                        });
                    }
                    inserted = true;
                } else {
                    exempt.insert(self.tri[t]);
                }
                t += 1;
            }
            if !inserted {
                return Ok(());
            }
        }
    }

    fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri[t].map(|i| self.pts[i]);
        0.5 * (b - a).perp(&(c - a))
    }
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * b.perp(&c);
    let (bb, cc) = (b.norm_squared(), c.norm_squared());
    a + nalgebra::Vector2::new(c.y * bb - b.y * cc, b.x * cc - c.x * bb) / d
}
