//! Bundled synthetic shapes and source/target pairs.

use std::f64::consts::TAU;

use nalgebra::Vector2;

use crate::geometry::{Point, Polygon};

/// Five-armed smooth star, `r(φ) = 0.4 (1 + 0.35 cos 5φ)`, 80 nodes.
pub fn star() -> Polygon {
    articulated(0.0)
}

/// The star with one arm swung sideways by about twelve degrees.
pub fn articulated_star() -> Polygon {
    articulated(0.2)
}

fn articulated(swing: f64) -> Polygon {
    let k = 80;
    Polygon::new(
        (0..k)
            .map(|i| {
                let phi = TAU * i as f64 / k as f64;
                let r = 0.4 * (1.0 + 0.35 * (5.0 * phi).cos());
                // Wrapped angle from the first arm's axis.
                let off = (phi + TAU / 2.0).rem_euclid(TAU) - TAU / 2.0;
                let turned = phi + swing * (-(off / 0.45).powi(2)).exp();
                Point::new(r * turned.cos(), r * turned.sin())
            })
            .collect(),
    )
}

/// Ellipse with semi-axes 0.5 and 0.3, 64 nodes.
pub fn ellipse() -> Polygon {
    let k = 64;
    Polygon::new(
        (0..k)
            .map(|i| {
                let t = TAU * i as f64 / k as f64;
                Point::new(0.5 * t.cos(), 0.3 * t.sin())
            })
            .collect(),
    )
}

/// Axis-aligned 0.84 × 0.5 rectangle centered at the origin.
pub fn rectangle() -> Polygon {
    Polygon::from_coords(&[[-0.42, -0.25], [0.42, -0.25], [0.42, 0.25], [-0.42, 0.25]])
}

/// Names accepted by [`pair`].
pub const PAIRS: [&str; 3] = ["translated-star", "ellipse-rectangle", "articulated-star"];

/// A bundled source/target pair by name.
pub fn pair(name: &str) -> Option<(Polygon, Polygon)> {
    Some(match name {
        "translated-star" => {
            let s = star();
            let diameter = s.bbox().expect("nonempty").diagonal();
            let t = s.translated(Vector2::new(0.1 * diameter, 0.0));
            (s, t)
        }
        "ellipse-rectangle" => (ellipse(), rectangle()),
        "articulated-star" => (star(), articulated_star()),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_simple;

    #[test]
    fn bundled_shapes_are_simple_and_ccw() {
        for p in [star(), articulated_star(), ellipse(), rectangle()] {
            assert!(is_simple(&p));
            assert!(p.signed_area() > 0.0);
        }
        for name in PAIRS {
            assert!(pair(name).is_some());
        }
        assert!(pair("nope").is_none());
    }
}
