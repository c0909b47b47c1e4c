//! The convex subproblem solved in each outer iteration.

use std::ops::Range;

use conic::{ConicError, ConicProgram, LinearMap};
use nalgebra::DVector;

use crate::elasticity::SchurOperator;
use crate::geometry::PolygonSet;
use crate::symdiff::{gradient, DeformedBoundary, SymdiffError, Warning};

/// Affine model `F(u) = f0 + gradᵀ(u − u0)` of the symmetric-difference area.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub f0: f64,
    pub grad: DVector<f64>,
    pub u0: DVector<f64>,
    pub warning: Option<Warning>,
}

impl Linearization {
    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        self.f0 + self.grad.dot(&(u - &self.u0))
    }
}

pub fn linearized_fidelity(db: &DeformedBoundary, target: &PolygonSet, h: f64) -> Result<Linearization, SymdiffError> {
    let g = gradient(db, target, h)?;
    Ok(Linearization {
        f0: g.area,
        grad: g.g,
        u0: db.displacement().clone(),
        warning: g.warning,
    })
}

/// What pulls the boundary towards the target.
#[derive(Clone, Copy, Debug)]
pub enum Fidelity<'a> {
    /// `F(u)²` with the affine area model.
    Area(&'a Linearization),
    /// `‖u − w‖²` for fixed per-node goal displacements `w`.
    ClosestPoint(&'a DVector<f64>),
}

/// Variable positions in a subproblem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub u: Range<usize>,
    pub f: Range<usize>,
    /// Epigraph of the weighted fidelity term `α·fidelity(u)`, absent when
    /// the weight is zero.
    pub d: Option<usize>,
    /// Epigraph of the weighted localization term `β‖u − u0‖²`.
    pub e: Option<usize>,
}

/// `min Σ f_i + d + e` over `(u, f, d, e)` with `‖S_i u‖ ≤ f_i`,
/// `d ≥ α·fidelity(u)` and `e ≥ β‖u − u0‖²`. The weights sit inside the
/// cones rather than in the costs, which keeps the cost vector flat.
pub fn build_subproblem(
    schur: &SchurOperator,
    u0: &DVector<f64>,
    fidelity: Fidelity<'_>,
    alpha: f64,
    beta: f64,
) -> Result<(ConicProgram, Layout), ConicError> {
    let k = schur.num_boundary();
    let check = |what: &str, len: usize| {
        if len == 2 * k {
            Ok(())
        } else {
            Err(ConicError::DimensionMismatch(format!("{what} has {len} entries, expected {}", 2 * k)))
        }
    };
    check("u0", u0.len())?;
    match fidelity {
        Fidelity::Area(lin) => check("area gradient", lin.grad.len())?,
        Fidelity::ClosestPoint(w) => check("goal displacement", w.len())?,
    }
    let mut p = ConicProgram::new(0);
    let u = p.add_variables(2 * k);
    let f = p.add_variables(k);
    let s = schur.matrix();
    for (i, fi) in f.clone().enumerate() {
        p.set_cost(fi, 1.0)?;
        let block: Vec<f64> = s.rows(2 * i, 2).transpose().iter().copied().collect();
        p.add_norm_epigraph(&LinearMap::from_dense(&block, 2, 2 * k, u.start), &[0.0, 0.0], fi)?;
    }
    let d = if alpha > 0.0 {
        let d = p.add_variable();
        p.set_cost(d, 1.0)?;
        let w = alpha.sqrt();
        match fidelity {
            Fidelity::Area(lin) => {
                let row: Vec<(usize, f64)> = u.clone().zip(lin.grad.iter()).filter(|(_, &g)| g != 0.0).map(|(v, &g)| (v, w * g)).collect();
                let offset = w * (lin.f0 - lin.grad.dot(&lin.u0));
                p.add_square_epigraph(&LinearMap::new(vec![row]), &[offset], d)?;
            }
            Fidelity::ClosestPoint(goal) => {
                let offset: Vec<f64> = goal.iter().map(|x| -w * x).collect();
                p.add_square_epigraph(&scaled_identity(u.clone(), w), &offset, d)?;
            }
        }
        Some(d)
    } else {
        None
    };
    let e = if beta > 0.0 {
        let e = p.add_variable();
        p.set_cost(e, 1.0)?;
        let w = beta.sqrt();
        let offset: Vec<f64> = u0.iter().map(|x| -w * x).collect();
        p.add_square_epigraph(&scaled_identity(u.clone(), w), &offset, e)?;
        Some(e)
    } else {
        None
    };
    Ok((p, Layout { u, f, d, e }))
}

fn scaled_identity(vars: Range<usize>, w: f64) -> LinearMap {
    LinearMap::new(vars.map(|i| vec![(i, w)]).collect())
}
