//! Per-triangle deformation gradients as linear functions of the boundary
//! displacement, and the convex cone that bounds their conformal distortion.

use std::ops::Range;

use conic::{AffineExpr, ConicError, ConicProgram};
use nalgebra::{DMatrix, DVector, Matrix2};

use crate::elasticity::{hat_gradients, ElasticityError, SchurOperator};
use crate::meshing::{NodeOrdering, TriMesh};

/// `J(u_B) = I + M u_B`, with the rows of `M` holding `J11, J12, J21, J22`.
#[derive(Clone, Debug)]
pub struct JacobianMap {
    pub m: DMatrix<f64>,
}

impl JacobianMap {
    pub fn eval(&self, u_b: &DVector<f64>) -> Matrix2<f64> {
        let v = &self.m * u_b;
        Matrix2::new(1.0 + v[0], v[1], v[2], 1.0 + v[3])
    }

    /// Affine expressions for the similarity coefficients `(a, b)` and the
    /// anti-similarity coefficients `(c, d)` over the variables `u`.
    fn parts(&self, u: &Range<usize>) -> [AffineExpr; 4] {
        let row = |w: [f64; 4], constant: f64| {
            let terms = u
                .clone()
                .enumerate()
                .map(|(j, var)| (var, (0..4).map(|r| w[r] * self.m[(r, j)]).sum::<f64>()))
                .filter(|&(_, c)| c != 0.0)
                .collect();
            AffineExpr::new(terms, constant)
        };
        [
            row([0.5, 0.0, 0.0, 0.5], 1.0),
            row([0.0, -0.5, 0.5, 0.0], 0.0),
            row([0.5, 0.0, 0.0, -0.5], 0.0),
            row([0.0, 0.5, 0.5, 0.0], 0.0),
        ]
    }
}

/// One map per mesh triangle, in mesh order. Interior nodes follow the
/// boundary through the recovery map of `schur`, so the maps are exact for
/// the harmonic extension.
pub fn triangle_jacobian_maps(
    mesh: &TriMesh,
    ord: &NodeOrdering,
    schur: &SchurOperator,
) -> Result<Vec<JacobianMap>, ElasticityError> {
    let k2 = 2 * ord.k;
    let r = schur.recovery_map();
    if schur.num_boundary() != ord.k || r.nrows() != 2 * ord.num_interior() {
        return Err(ElasticityError::DimensionMismatch {
            expected: 2 * ord.num_interior(),
            got: r.nrows(),
        });
    }
    Ok(mesh
        .triangles
        .iter()
        .map(|t| {
            let (grads, _) = hat_gradients(t.map(|v| mesh.nodes[v]));
            let mut m = DMatrix::zeros(4, k2);
            for (&v, g) in t.iter().zip(&grads) {
                let s = ord.to_system[v];
                for comp in 0..2 {
                    // ∂u_comp/∂x_j picks up g[j] times this node's displacement.
                    for j in 0..2 {
                        let row = 2 * comp + j;
                        if s < ord.k {
                            m[(row, 2 * s + comp)] += g[j];
                        } else {
                            let ri = 2 * (s - ord.k) + comp;
                            for c in 0..k2 {
                                m[(row, c)] += g[j] * r[(ri, c)];
                            }
                        }
                    }
                }
            }
            JacobianMap { m }
        })
        .collect())
}

/// Conformal distortion of one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distortion {
    /// `σ_max / σ_min`, infinite for a singular map.
    pub cd: f64,
    /// `det J ≤ 0`.
    pub flipped: bool,
}

/// Similarity and anti-similarity coefficients of `J`.
fn decompose(j: &Matrix2<f64>) -> (f64, f64, f64, f64) {
    (
        0.5 * (j[(0, 0)] + j[(1, 1)]),
        0.5 * (j[(1, 0)] - j[(0, 1)]),
        0.5 * (j[(0, 0)] - j[(1, 1)]),
        0.5 * (j[(0, 1)] + j[(1, 0)]),
    )
}

pub fn conformal_distortion(j: &Matrix2<f64>) -> Distortion {
    let (a, b, c, d) = decompose(j);
    let sim = a.hypot(b);
    let anti = c.hypot(d);
    let smin = (sim - anti).abs();
    Distortion {
        cd: if smin > 0.0 { (sim + anti) / smin } else { f64::INFINITY },
        flipped: j.determinant() <= 0.0,
    }
}

/// Rotation angle of the polar factor of `J`, i.e. the argument of its
/// similarity part.
pub fn polar_angle(j: &Matrix2<f64>) -> f64 {
    let (a, b, _, _) = decompose(j);
    b.atan2(a)
}

pub fn frames(maps: &[JacobianMap], u_b: &DVector<f64>) -> Vec<f64> {
    maps.iter().map(|m| polar_angle(&m.eval(u_b))).collect()
}

/// Appends `‖(c, d)‖ ≤ k (cos θ a + sin θ b)` per triangle with
/// `k = (K_b − 1)/(K_b + 1)`. Any feasible `J` has `det J > 0` and
/// conformal distortion at most `K_b`.
pub fn add_distortion_constraints(
    p: &mut ConicProgram,
    u: Range<usize>,
    maps: &[JacobianMap],
    bound: f64,
    frames: &[f64],
) -> Result<(), ConicError> {
    if !(bound > 1.0) {
        return Err(ConicError::DimensionMismatch(format!("distortion bound must exceed 1, got {bound}")));
    }
    if frames.len() != maps.len() {
        return Err(ConicError::DimensionMismatch(format!("{} frames for {} triangles", frames.len(), maps.len())));
    }
    let k = (bound - 1.0) / (bound + 1.0);
    for (map, &theta) in maps.iter().zip(frames) {
        let [a, b, c, d] = map.parts(&u);
        let t = a.scaled(k * theta.cos()).plus(&b.scaled(k * theta.sin()));
        p.add_second_order_cone(vec![t, c, d])?;
    }
    Ok(())
}
