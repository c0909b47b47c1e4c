//! Triangle meshes of the source interior and the boundary-first node
//! numbering used by the condensed elastic system.

mod off;
mod triangulate;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{BBox, Point, Polygon};

pub use triangulate::triangulate;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mesh refinement failed near ({x:.6}, {y:.6}): {message}")]
    Failure { message: String, x: f64, y: f64 },
    #[error("malformed mesh: {0}")]
    Malformed(String),
    #[error("mesh file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Refinement targets. Triangles larger than `max_triangle_area` are always
/// split; triangles with an angle below `min_angle_deg` are split when their
/// circumcenter can be inserted without touching the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshParams {
    pub max_triangle_area: f64,
    pub min_angle_deg: f64,
}

impl MeshParams {
    pub const DEFAULT_MIN_ANGLE: f64 = 25.0;

    /// Default targets for a shape: a few hundred triangles for a simple
    /// outline.
    pub fn for_polygon(p: &Polygon) -> Self {
        Self {
            max_triangle_area: p.signed_area().abs() / 300.0,
            min_angle_deg: Self::DEFAULT_MIN_ANGLE,
        }
    }
}

/// A conforming triangulation of a simple polygon. Triangles are CCW.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Node indices along the boundary, CCW.
    pub boundary_loop: Vec<usize>,
}

impl TriMesh {
    /// Builds a mesh and recovers the boundary loop from the edges used by
    /// exactly one triangle.
    pub fn from_triangles(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let boundary_loop = boundary_cycle(nodes.len(), &triangles)?;
        let mesh = Self {
            nodes,
            triangles,
            boundary_loop,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(MeshError::Malformed(format!("triangle {t} references a missing node")));
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(MeshError::Malformed(format!("triangle {t} is not CCW with positive area")));
            }
        }
        let mut uses: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for i in 0..3 {
                *uses.entry((tri[i], tri[(i + 1) % 3])).or_default() += 1;
            }
        }
        // A directed edge used twice means overlapping or inconsistently
        // oriented triangles.
        if let Some((&(a, b), _)) = uses.iter().find(|(_, &c)| c > 1) {
            return Err(MeshError::Malformed(format!("edge ({a}, {b}) is not manifold")));
        }
        let mut used = vec![false; n];
        self.triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::Malformed(format!("node {v} belongs to no triangle")));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary_loop.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b - a).perp(&(c - a)))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Number of distinct (undirected) edges.
    pub fn num_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i].min(t[(i + 1) % 3]), t[i].max(t[(i + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_min_angle(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    pub fn boundary_polygon(&self) -> Polygon {
        Polygon::new(self.boundary_loop.iter().map(|&i| self.nodes[i]).collect())
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of(self.nodes.iter())
    }
}

pub(crate) fn triangle_min_angle(a: Point, b: Point, c: Point) -> f64 {
    let angle = |p: Point, q: Point, r: Point| {
        let (u, v) = (q - p, r - p);
        u.perp(&v).abs().atan2(u.dot(&v))
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}

/// Directed boundary edges (those without a twin) chained into one cycle.
fn boundary_cycle(n: usize, triangles: &[[usize; 3]]) -> Result<Vec<usize>, MeshError> {
    let mut directed = std::collections::HashSet::new();
    for t in triangles {
        for i in 0..3 {
            directed.insert((t[i], t[(i + 1) % 3]));
        }
    }
    let mut next = vec![usize::MAX; n];
    let mut count = 0;
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) {
            if next[a] != usize::MAX {
                return Err(MeshError::Malformed(format!("boundary pinches at node {a}")));
            }
            next[a] = b;
            count += 1;
        }
    }
    let Some(start) = next.iter().position(|&b| b != usize::MAX) else {
        return Err(MeshError::Malformed("mesh has no boundary".into()));
    };
    let mut cycle = vec![start];
    let mut v = next[start];
    while v != start {
        if cycle.len() > count || v == usize::MAX {
            return Err(MeshError::Malformed("boundary edges do not close up".into()));
        }
        cycle.push(v);
        v = next[v];
    }
    if cycle.len() != count {
        return Err(MeshError::Malformed("boundary has more than one cycle".into()));
    }
    Ok(cycle)
}

/// Boundary-first renumbering: boundary nodes take system indices `0..k` in
/// loop order, interior nodes follow in mesh order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeOrdering {
    /// Mesh index to system index.
    pub to_system: Vec<usize>,
    /// System index to mesh index.
    pub to_mesh: Vec<usize>,
    pub k: usize,
    pub n: usize,
}

impl NodeOrdering {
    pub fn is_identity(&self) -> bool {
        self.to_system.iter().enumerate().all(|(i, &s)| i == s)
    }

    pub fn num_interior(&self) -> usize {
        self.n - self.k
    }
}

pub fn order_nodes(m: &TriMesh) -> NodeOrdering {
    let n = m.nodes.len();
    let k = m.boundary_loop.len();
    let mut to_system = vec![usize::MAX; n];
    for (s, &v) in m.boundary_loop.iter().enumerate() {
        to_system[v] = s;
    }
    let mut next = k;
    for slot in to_system.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let mut to_mesh = vec![0; n];
    for (v, &s) in to_system.iter().enumerate() {
        to_mesh[s] = v;
    }
    NodeOrdering { to_system, to_mesh, k, n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn single_triangle_ordering() {
        let m = TriMesh::from_triangles(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0)], vec![[0, 1, 2]]).unwrap();
        let o = order_nodes(&m);
        assert_eq!((o.k, o.n), (3, 3));
        assert_eq!(o.num_interior(), 0);
    }

    #[test]
    fn square_with_center_node() {
        let nodes = vec![pt(0.5, 0.5), pt(0.0, 0.0), pt(1.0, 0.0), pt(1.0, 1.0), pt(0.0, 1.0)];
        let tris = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]];
        let m = TriMesh::from_triangles(nodes, tris).unwrap();
        let o = order_nodes(&m);
        assert_eq!((o.k, o.n), (4, 5));
        assert_eq!(o.to_system[0], 4);
        assert_eq!(o.to_mesh[4], 0);
    }

    #[test]
    fn rejects_clockwise_and_pinched_meshes() {
        let nodes = vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0)];
        assert!(TriMesh::from_triangles(nodes, vec![[0, 2, 1]]).is_err());
        // Two triangles sharing only node 0.
        let nodes = vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0), pt(-1.0, 0.0), pt(0.0, -1.0)];
        assert!(TriMesh::from_triangles(nodes, vec![[0, 1, 2], [0, 3, 4]]).is_err());
    }
}
