//! Symmetric-difference area between the displaced source boundary and the
//! target, and its gradient reduced to the vertex normal directions.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DVector, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{is_simple, outward_normals, symdiff_area, BBox, GeometryError, Polygon, PolygonSet};

#[derive(Debug, Error)]
pub enum SymdiffError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("displacement has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

/// Conditions the caller should know about but that do not stop a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Warning {
    /// The deformed source and the target do not overlap, so the gradient
    /// only shrinks the source.
    NoOverlap,
}

/// Source boundary with its current displacement.
#[derive(Clone, Debug)]
pub struct DeformedBoundary {
    base: Polygon,
    u: DVector<f64>,
    ring: Polygon,
    simple: bool,
}

impl DeformedBoundary {
    pub fn new(base: Polygon, u: DVector<f64>) -> Result<Self, SymdiffError> {
        if u.len() != 2 * base.len() {
            return Err(SymdiffError::DimensionMismatch {
                expected: 2 * base.len(),
                got: u.len(),
            });
        }
        let ring = Polygon::from_vertices_unchecked(
            base.vertices().iter().enumerate().map(|(i, p)| p + Vector2::new(u[2 * i], u[2 * i + 1])).collect(),
        );
        let simple = is_simple(&ring);
        Ok(Self { base, u, ring, simple })
    }

    pub fn undeformed(base: Polygon) -> Self {
        let k = base.len();
        Self::new(base, DVector::zeros(2 * k)).expect("sizes agree")
    }

    pub fn base(&self) -> &Polygon {
        &self.base
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn ring(&self) -> &Polygon {
        &self.ring
    }

    /// Whether the deformed ring is simple. A self-intersecting ring is
    /// still evaluated, with even–odd filling.
    pub fn is_valid(&self) -> bool {
        self.simple
    }

    pub fn num_nodes(&self) -> usize {
        self.base.len()
    }
}

pub fn area_at(db: &DeformedBoundary, target: &PolygonSet) -> Result<f64, SymdiffError> {
    Ok(ring_area(db.ring(), target)?)
}

fn ring_area(ring: &Polygon, target: &PolygonSet) -> Result<f64, GeometryError> {
    symdiff_area(&PolygonSet::from_polygon(ring.clone()), target)
}

/// Gradient of the area with respect to the interleaved boundary
/// displacement, nonzero only along the vertex normals.
#[derive(Clone, Debug)]
pub struct SymdiffGradient {
    pub g: DVector<f64>,
    pub normals: Vec<Vector2<f64>>,
    /// Forward-difference derivative along each normal.
    pub d: Vec<f64>,
    /// Area at the unperturbed configuration.
    pub area: f64,
    /// Number of area evaluations spent.
    pub clip_calls: usize,
    pub warning: Option<Warning>,
}

/// Default finite-difference step: `1e-3` of the joint bounding-box diagonal.
pub fn default_step(db: &DeformedBoundary, target: &PolygonSet) -> f64 {
    let bb = db.ring().bbox();
    let joint = match (bb, target.bbox()) {
        (Some(a), Some(b)) => a.union(&b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => BBox {
            min: crate::geometry::Point::origin(),
            max: crate::geometry::Point::new(1.0, 1.0),
        },
    };
    1e-3 * joint.diagonal()
}

/// One-sided differences along the outward normals of the deformed ring:
/// `d_i = (area(node i moved by h n_i) − area) / h` and `g_i = d_i n_i`.
/// Uses exactly `K + 1` area evaluations, the perturbed ones in parallel.
pub fn gradient(db: &DeformedBoundary, target: &PolygonSet, h: f64) -> Result<SymdiffGradient, SymdiffError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SymdiffError::InvalidStep(h));
    }
    let calls = AtomicUsize::new(0);
    let eval = |ring: &Polygon| {
        calls.fetch_add(1, Ordering::Relaxed);
        ring_area(ring, target)
    };
    let ring = db.ring();
    let normals = outward_normals(ring)?;
    let area = eval(ring)?;
    let d = (0..ring.len())
        .into_par_iter()
        .map(|i| {
            let mut v = ring.vertices().to_vec();
            v[i] += h * normals[i];
            Ok((eval(&Polygon::from_vertices_unchecked(v))? - area) / h)
        })
        .collect::<Result<Vec<f64>, GeometryError>>()?;
    let g = DVector::from_iterator(2 * d.len(), d.iter().zip(&normals).flat_map(|(di, n)| [di * n.x, di * n.y]));
    let overlap = 0.5 * (ring.signed_area().abs() + target.area() - area);
    let warning = (overlap <= 1e-12 * (ring.signed_area().abs() + target.area())).then_some(Warning::NoOverlap);
    Ok(SymdiffGradient {
        g,
        normals,
        d,
        area,
        clip_calls: calls.into_inner(),
        warning,
    })
}

/// The driving force on the boundary: the negative area gradient.
pub fn restoring_force(grad: &SymdiffGradient) -> DVector<f64> {
    -&grad.g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    }

    fn shifted(dx: f64) -> DVector<f64> {
        DVector::from_iterator(8, (0..4).flat_map(|_| [dx, 0.0]))
    }

    #[test]
    fn translated_unit_squares() {
        let target = PolygonSet::from_polygon(unit_square());
        let zero = DeformedBoundary::undeformed(unit_square());
        assert_eq!(area_at(&zero, &target).unwrap(), 0.0);
        let full = DeformedBoundary::new(unit_square(), shifted(1.0)).unwrap();
        assert_eq!(area_at(&full, &target).unwrap(), 2.0);
        let half = DeformedBoundary::new(unit_square(), shifted(0.5)).unwrap();
        assert_eq!(area_at(&half, &target).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_shapes_raise_no_overlap() {
        let target = PolygonSet::from_polygon(unit_square());
        let far = DeformedBoundary::new(unit_square(), shifted(3.0)).unwrap();
        let g = gradient(&far, &target, 1e-3).unwrap();
        assert_eq!(g.warning, Some(Warning::NoOverlap));
        let near = DeformedBoundary::new(unit_square(), shifted(0.3)).unwrap();
        assert_eq!(gradient(&near, &target, 1e-3).unwrap().warning, None);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(DeformedBoundary::new(unit_square(), DVector::zeros(6)).is_err());
        let db = DeformedBoundary::undeformed(unit_square());
        let target = PolygonSet::from_polygon(unit_square());
        assert!(matches!(gradient(&db, &target, 0.0), Err(SymdiffError::InvalidStep(_))));
    }
}
