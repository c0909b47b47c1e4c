//! OFF-style mesh files: `OFF`, then `N F 0`, then `N` lines `x y 0` and `F`
//! lines `3 i j k`. Comments start with `#`.

use std::path::Path;

use super::{MeshError, TriMesh};
use crate::geometry::Point;

impl TriMesh {
    pub fn from_off_str(s: &str) -> Result<Self, MeshError> {
        let mut lines = s
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        if lines.next() != Some("OFF") {
            return Err(MeshError::Parse("missing OFF header".into()));
        }
        let counts = numbers::<usize>(lines.next().ok_or_else(|| MeshError::Parse("missing counts line".into()))?)?;
        let (n, f) = match counts[..] {
            [n, f, _] | [n, f] => (n, f),
            _ => return Err(MeshError::Parse("counts line must read `N F 0`".into())),
        };
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let v = numbers::<f64>(lines.next().ok_or_else(|| MeshError::Parse(format!("missing vertex {i}")))?)?;
            if v.len() < 2 || v.iter().any(|x| !x.is_finite()) {
                return Err(MeshError::Parse(format!("bad vertex {i}")));
            }
            nodes.push(Point::new(v[0], v[1]));
        }
        let mut triangles = Vec::with_capacity(f);
        for i in 0..f {
            let t = numbers::<usize>(lines.next().ok_or_else(|| MeshError::Parse(format!("missing face {i}")))?)?;
            match t[..] {
                [3, a, b, c] => triangles.push([a, b, c]),
                _ => return Err(MeshError::Parse(format!("face {i} is not a triangle"))),
            }
        }
        TriMesh::from_triangles(nodes, triangles)
    }

    pub fn to_off_string(&self) -> String {
        let mut out = format!("OFF\n{} {} 0\n", self.nodes.len(), self.triangles.len());
        for p in &self.nodes {
            out.push_str(&format!("{:?} {:?} 0\n", p.x, p.y));
        }
        for [a, b, c] in &self.triangles {
            out.push_str(&format!("3 {a} {b} {c}\n"));
        }
        out
    }

    pub fn read_off(path: &Path) -> Result<Self, MeshError> {
        Self::from_off_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_off(&self, path: &Path) -> Result<(), MeshError> {
        std::fs::write(path, self.to_off_string())?;
        Ok(())
    }
}

fn numbers<T: std::str::FromStr>(line: &str) -> Result<Vec<T>, MeshError> {
    line.split_whitespace()
        .map(|w| w.parse().map_err(|_| MeshError::Parse(format!("cannot parse `{w}`"))))
        .collect()
}
