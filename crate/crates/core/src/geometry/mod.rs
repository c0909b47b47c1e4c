//! Polygons, polygon sets with holes, Boolean clipping and areas.

mod clip;
mod io;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

pub use clip::{clip, symdiff_area};
pub use io::{read_shape, write_shape};

pub type Point = Point2<f64>;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("clipping degeneracy: {0}")]
    ClipDegeneracy(String),
    #[error("degenerate vertex {index}: adjacent edges are anti-parallel or of zero length")]
    DegenerateVertex { index: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("cannot read shape: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A closed ring of vertices. The last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a ring, dropping repeated consecutive vertices (including a
    /// closing vertex equal to the first one).
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut out: Vec<Point> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        Self { vertices: out }
    }

    /// Keeps the vertices as given, repeats included. Displaced rings use
    /// this so vertex `i` stays node `i`.
    pub fn from_vertices_unchecked(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Self {
        Self::new(coords.iter().map(|c| Point::new(c[0], c[1])).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterator over the edges `(v_i, v_{i+1})`, closing the ring.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(self)
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { vertices: v }
    }

    /// Same ring, counter-clockwise.
    pub fn to_ccw(&self) -> Self {
        if self.signed_area() < 0.0 {
            self.reversed()
        } else {
            self.clone()
        }
    }

    pub fn translated(&self, t: Vector2<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p + t).collect(),
        }
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn(&Point) -> Point) -> Self {
        Self::new(self.vertices.iter().map(f).collect())
    }

    /// Vertices displaced by an interleaved vector `(u1x, u1y, u2x, ...)`.
    pub fn displaced(&self, u: &[f64]) -> Self {
        assert_eq!(u.len(), 2 * self.len(), "displacement length");
        Self {
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(i, p)| Point::new(p.x + u[2 * i], p.y + u[2 * i + 1]))
                .collect(),
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of(self.vertices.iter())
    }

    /// Area centroid; falls back to the vertex mean for degenerate rings.
    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        let n = self.vertices.len();
        if a.abs() < 1e-300 || n < 3 {
            let s = self.vertices.iter().fold(Vector2::zeros(), |s, p| s + p.coords);
            return Point::from(s / n.max(1) as f64);
        }
        let mut c = Vector2::zeros();
        for (p, q) in self.edges() {
            let w = p.x * q.y - q.x * p.y;
            c += (p.coords + q.coords) * w;
        }
        Point::from(c / (6.0 * a))
    }

    /// Sum of edge lengths.
    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(p, q)| (q - p).norm()).sum()
    }

    /// Whether `p` lies strictly inside (even–odd rule; boundary points are
    /// reported as outside).
    pub fn contains(&self, p: &Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of<'a>(points: impl Iterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.peekable();
        let first = **it.peek()?;
        let mut b = Self { min: first, max: first };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

/// Shoelace signed area; positive iff counter-clockwise.
pub fn signed_area(p: &Polygon) -> f64 {
    let v = &p.vertices;
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    // Relative to the first vertex to limit cancellation.
    let o = v[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        let a = v[i] - o;
        let b = v[i + 1] - o;
        s += a.x * b.y - a.y * b.x;
    }
    0.5 * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Outer,
    Hole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub polygon: Polygon,
    pub role: Role,
}

/// Several rings, outer boundaries and holes, filled by the even–odd rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolygonSet {
    pub rings: Vec<Ring>,
}

impl PolygonSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_polygon(p: Polygon) -> Self {
        Self {
            rings: vec![Ring {
                polygon: p.to_ccw(),
                role: Role::Outer,
            }],
        }
    }

    pub fn with_hole(mut self, hole: Polygon) -> Self {
        self.rings.push(Ring {
            polygon: hole.to_ccw().reversed(),
            role: Role::Hole,
        });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    pub fn outers(&self) -> impl Iterator<Item = &Polygon> {
        self.rings.iter().filter(|r| r.role == Role::Outer).map(|r| &r.polygon)
    }

    pub fn holes(&self) -> impl Iterator<Item = &Polygon> {
        self.rings.iter().filter(|r| r.role == Role::Hole).map(|r| &r.polygon)
    }

    pub fn area(&self) -> f64 {
        set_area(self)
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of(self.rings.iter().flat_map(|r| r.polygon.vertices.iter()))
    }

    /// Outer rings counter-clockwise, holes clockwise.
    pub fn canonicalized(&self) -> Self {
        Self {
            rings: self
                .rings
                .iter()
                .map(|r| {
                    let ccw = r.polygon.to_ccw();
                    Ring {
                        polygon: match r.role {
                            Role::Outer => ccw,
                            Role::Hole => ccw.reversed(),
                        },
                        role: r.role,
                    }
                })
                .collect(),
        }
    }

    /// Checks the set invariants: rings simple with at least three vertices,
    /// every hole inside exactly one outer ring.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (k, r) in self.rings.iter().enumerate() {
            if r.polygon.len() < 3 {
                return Err(GeometryError::InvalidShape(format!("ring {k} has fewer than 3 vertices")));
            }
            if !is_simple(&r.polygon) {
                return Err(GeometryError::InvalidShape(format!("ring {k} is not simple")));
            }
        }
        for (k, hole) in self.holes().enumerate() {
            let probe = interior_probe(hole);
            let owners = self.outers().filter(|o| o.contains(&probe)).count();
            if owners != 1 {
                return Err(GeometryError::InvalidShape(format!(
                    "hole {k} lies inside {owners} outer rings"
                )));
            }
        }
        Ok(())
    }

    pub fn translated(&self, t: Vector2<f64>) -> Self {
        Self {
            rings: self
                .rings
                .iter()
                .map(|r| Ring {
                    polygon: r.polygon.translated(t),
                    role: r.role,
                })
                .collect(),
        }
    }
}

impl From<Polygon> for PolygonSet {
    fn from(p: Polygon) -> Self {
        Self::from_polygon(p)
    }
}

/// A point just inside the ring near its first edge midpoint, used to test
/// hole containment.
fn interior_probe(p: &Polygon) -> Point {
    let (a, b) = p.edges().next().expect("nonempty ring");
    let m = nalgebra::center(&a, &b);
    let d = b - a;
    let mut n = Vector2::new(-d.y, d.x) * 1e-6;
    if p.signed_area() < 0.0 {
        n = -n;
    }
    m + n
}

/// Area of outer rings minus area of holes.
pub fn set_area(s: &PolygonSet) -> f64 {
    let mut total = 0.0;
    for r in &s.rings {
        let a = r.polygon.signed_area().abs();
        match r.role {
            Role::Outer => total += a,
            Role::Hole => total -= a,
        }
    }
    total.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    Intersection,
    Union,
    Difference,
    SymmetricDifference,
}

impl BoolOp {
    pub const ALL: [BoolOp; 4] = [
        BoolOp::Intersection,
        BoolOp::Union,
        BoolOp::Difference,
        BoolOp::SymmetricDifference,
    ];

    pub(crate) fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::Intersection => a && b,
            BoolOp::Union => a || b,
            BoolOp::Difference => a && !b,
            BoolOp::SymmetricDifference => a != b,
        }
    }
}

/// Unit outward vertex normals: the normalized sum of the two adjacent edge
/// normals (the angle bisector). "Outward" follows the ring's orientation,
/// so clockwise rings get normals pointing to their right.
pub fn outward_normals(p: &Polygon) -> Result<Vec<Vector2<f64>>, GeometryError> {
    let v = p.vertices();
    let n = v.len();
    if n < 3 {
        return Err(GeometryError::DegenerateVertex { index: 0 });
    }
    let sign = if p.signed_area() < 0.0 { -1.0 } else { 1.0 };
    let edge_normal = |i: usize| -> Option<Vector2<f64>> {
        let d = v[(i + 1) % n] - v[i];
        let len = d.norm();
        (len > 0.0).then(|| Vector2::new(d.y, -d.x) * (sign / len))
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = edge_normal((i + n - 1) % n).ok_or(GeometryError::DegenerateVertex { index: i })?;
        let next = edge_normal(i).ok_or(GeometryError::DegenerateVertex { index: i })?;
        let s = prev + next;
        let len = s.norm();
        if len < 1e-12 {
            return Err(GeometryError::DegenerateVertex { index: i });
        }
        out.push(s / len);
    }
    Ok(out)
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    )
}

fn on_segment(a: &Point, b: &Point, c: &Point) -> bool {
    c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
}

fn segments_touch(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True iff no two non-adjacent edges touch and no two adjacent edges fold
/// back onto each other. Exact predicates, x-sorted sweep.
pub fn is_simple(p: &Polygon) -> bool {
    let v = p.vertices();
    let n = v.len();
    if n < 3 {
        return false;
    }
    // Adjacent edges may only share their common vertex.
    for i in 0..n {
        let a = &v[(i + n - 1) % n];
        let b = &v[i];
        let c = &v[(i + 1) % n];
        if orient(a, b, c) == 0.0 && (a - b).dot(&(c - b)) > 0.0 {
            return false;
        }
    }
    if n == 3 {
        return orient(&v[0], &v[1], &v[2]) != 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let xmin = |i: usize| v[i].x.min(v[(i + 1) % n].x);
    let xmax = |i: usize| v[i].x.max(v[(i + 1) % n].x);
    order.sort_by(|&i, &j| xmin(i).total_cmp(&xmin(j)));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let lo = xmin(i);
        active.retain(|&j| xmax(j) >= lo);
        for &j in &active {
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                continue;
            }
            if segments_touch(&v[i], &v[(i + 1) % n], &v[j], &v[(j + 1) % n]) {
                return false;
            }
        }
        active.push(i);
    }
    true
}
