//! Problem representation.
//!
//! A [`ConicProgram`] is
//!
//! ```text
//! minimize    cᵀx
//! subject to  a_iᵀx = b_i                      (equalities)
//!             (e_1(x), …, e_q(x)) ∈ Q^q          (second-order cones)
//!             e(x) ≥ 0                           (nonnegativity)
//! ```
//!
//! where every `e(x)` is an affine expression and `Q^q = {(t, z) : ‖z‖₂ ≤ t}`.
//! Cone memberships on plain index slices are the special case where each
//! expression selects a single variable.

use std::fmt::Write as _;
use std::ops::Range;

use crate::ConicError;

/// Sparse affine expression `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn plus(mut self, other: &AffineExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

/// A linear map given row by row in sparse form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearMap {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl LinearMap {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { rows }
    }

    /// Dense row-major block applied to the variables starting at `first_var`.
    pub fn from_dense(values: &[f64], nrows: usize, ncols: usize, first_var: usize) -> Self {
        assert_eq!(values.len(), nrows * ncols);
        let rows = (0..nrows)
            .map(|r| {
                (0..ncols)
                    .filter_map(|c| {
                        let v = values[r * ncols + c];
                        (v != 0.0).then_some((first_var + c, v))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn identity(vars: Range<usize>) -> Self {
        Self {
            rows: vars.map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn affine_rows(&self, offset: &[f64]) -> Vec<AffineExpr> {
        self.rows
            .iter()
            .zip(offset)
            .map(|(r, &o)| AffineExpr::new(r.clone(), o))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    NonNegative,
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub kind: ConeKind,
    pub rows: Vec<AffineExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    objective: Vec<f64>,
    objective_constant: f64,
    equalities: Vec<Equality>,
    cones: Vec<ConeConstraint>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn cones(&self) -> &[ConeConstraint] {
        &self.cones
    }

    /// Appends `count` fresh variables and returns their index range.
    pub fn add_variables(&mut self, count: usize) -> Range<usize> {
        let start = self.objective.len();
        self.objective.resize(start + count, 0.0);
        start..start + count
    }

    pub fn add_variable(&mut self) -> usize {
        self.add_variables(1).start
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) -> Result<(), ConicError> {
        self.check_var(var)?;
        self.objective[var] = cost;
        Ok(())
    }

    pub fn set_objective_constant(&mut self, value: f64) {
        self.objective_constant = value;
    }

    /// Replaces the whole cost vector (used by scaling checks).
    pub fn with_objective_scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        for c in &mut p.objective {
            *c *= factor;
        }
        p.objective_constant *= factor;
        p
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> Result<(), ConicError> {
        for &(i, _) in &terms {
            self.check_var(i)?;
        }
        self.equalities.push(Equality { terms, rhs });
        Ok(())
    }

    pub fn add_nonnegative(&mut self, expr: AffineExpr) -> Result<(), ConicError> {
        self.check_expr(&expr)?;
        self.cones.push(ConeConstraint {
            kind: ConeKind::NonNegative,
            rows: vec![expr],
        });
        Ok(())
    }

    /// `(rows[0], rows[1..]) ∈ Q`, i.e. `‖rows[1..]‖₂ ≤ rows[0]`.
    pub fn add_second_order_cone(&mut self, rows: Vec<AffineExpr>) -> Result<(), ConicError> {
        if rows.is_empty() {
            return Err(ConicError::DimensionMismatch(
                "a second-order cone needs at least one row".into(),
            ));
        }
        for r in &rows {
            self.check_expr(r)?;
        }
        self.cones.push(ConeConstraint {
            kind: ConeKind::SecondOrder,
            rows,
        });
        Ok(())
    }

    /// Cone membership of a contiguous index slice: `x[slice] ∈ Q`.
    pub fn add_slice_cone(&mut self, slice: Range<usize>) -> Result<(), ConicError> {
        self.add_second_order_cone(slice.map(AffineExpr::var).collect())
    }

    /// Epigraph of a Euclidean norm: `‖L x + offset‖₂ ≤ x[bound]`.
    ///
    /// `bound` should be a fresh auxiliary variable carrying the cost.
    pub fn add_norm_epigraph(
        &mut self,
        map: &LinearMap,
        offset: &[f64],
        bound: usize,
    ) -> Result<(), ConicError> {
        if offset.len() != map.nrows() {
            return Err(ConicError::DimensionMismatch(format!(
                "norm epigraph: {} rows but offset of length {}",
                map.nrows(),
                offset.len()
            )));
        }
        self.check_var(bound)?;
        let mut rows = Vec::with_capacity(map.nrows() + 1);
        rows.push(AffineExpr::var(bound));
        rows.extend(map.affine_rows(offset));
        self.add_second_order_cone(rows)
    }

    /// Epigraph of a squared norm: `‖L x + offset‖₂² ≤ x[bound]`, encoded as
    /// `‖(2(L x + offset), d − 1)‖₂ ≤ d + 1`.
    pub fn add_square_epigraph(
        &mut self,
        map: &LinearMap,
        offset: &[f64],
        bound: usize,
    ) -> Result<(), ConicError> {
        if offset.len() != map.nrows() {
            return Err(ConicError::DimensionMismatch(format!(
                "square epigraph: {} rows but offset of length {}",
                map.nrows(),
                offset.len()
            )));
        }
        self.check_var(bound)?;
        let d = AffineExpr::var(bound);
        let mut rows = Vec::with_capacity(map.nrows() + 2);
        rows.push(d.clone().plus(&AffineExpr::constant(1.0)));
        rows.extend(map.affine_rows(offset).into_iter().map(|r| r.scaled(2.0)));
        rows.push(d.plus(&AffineExpr::constant(-1.0)));
        self.add_second_order_cone(rows)
    }

    /// Objective value `cᵀx + constant` at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_constant
    }

    /// Largest violation over all constraints at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for eq in &self.equalities {
            let lhs: f64 = eq.terms.iter().map(|&(i, c)| c * x[i]).sum();
            worst = worst.max((lhs - eq.rhs).abs());
        }
        for cone in &self.cones {
            let vals: Vec<f64> = cone.rows.iter().map(|r| r.eval(x)).collect();
            let v = match cone.kind {
                ConeKind::NonNegative => -vals[0],
                ConeKind::SecondOrder => {
                    let tail: f64 = vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    tail - vals[0]
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Plain-text dump: sizes, cost, equality and cone triplets.
    ///
    /// ```text
    /// conic n=<vars> p=<equalities> cones=<count>
    /// c <i> <value>            (nonzero costs)
    /// c0 <constant>
    /// eq <row> <var> <coef>    (triplets)    eqrhs <row> <rhs>
    /// cone <k> soc|nonneg <dim>
    /// g <k> <row-in-cone> <var> <coef>        h <k> <row-in-cone> <const>
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "conic n={} p={} cones={}",
            self.num_vars(),
            self.equalities.len(),
            self.cones.len()
        );
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "c {i} {c:e}");
            }
        }
        let _ = writeln!(out, "c0 {:e}", self.objective_constant);
        for (r, eq) in self.equalities.iter().enumerate() {
            for &(i, v) in &eq.terms {
                let _ = writeln!(out, "eq {r} {i} {v:e}");
            }
            let _ = writeln!(out, "eqrhs {r} {:e}", eq.rhs);
        }
        for (k, cone) in self.cones.iter().enumerate() {
            let kind = match cone.kind {
                ConeKind::NonNegative => "nonneg",
                ConeKind::SecondOrder => "soc",
            };
            let _ = writeln!(out, "cone {k} {kind} {}", cone.rows.len());
            for (r, row) in cone.rows.iter().enumerate() {
                for &(i, v) in &row.terms {
                    let _ = writeln!(out, "g {k} {r} {i} {v:e}");
                }
                let _ = writeln!(out, "h {k} {r} {:e}", row.constant);
            }
        }
        out
    }

    fn check_var(&self, var: usize) -> Result<(), ConicError> {
        if var >= self.num_vars() {
            return Err(ConicError::DimensionMismatch(format!(
                "variable {var} out of range (n = {})",
                self.num_vars()
            )));
        }
        Ok(())
    }

    fn check_expr(&self, expr: &AffineExpr) -> Result<(), ConicError> {
        match expr.max_index() {
            Some(i) => self.check_var(i),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_epigraph_rows() {
        let mut p = ConicProgram::new(2);
        p.add_square_epigraph(&LinearMap::identity(0..1), &[0.5], 1)
            .unwrap();
        let cone = &p.cones()[0];
        assert_eq!(cone.kind, ConeKind::SecondOrder);
        assert_eq!(cone.rows.len(), 3);
        // x = 1.5, d = 4: rows evaluate to (5, 4, 3), which is on the boundary.
        let vals: Vec<f64> = cone.rows.iter().map(|r| r.eval(&[1.5, 4.0])).collect();
        assert_eq!(vals, vec![5.0, 4.0, 3.0]);
        assert!(p.max_violation(&[1.5, 4.0]).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let mut p = ConicProgram::new(3);
        let map = LinearMap::identity(0..2);
        assert!(matches!(
            p.add_norm_epigraph(&map, &[1.0], 2),
            Err(ConicError::DimensionMismatch(_))
        ));
        assert!(matches!(
            p.add_norm_epigraph(&map, &[1.0, 2.0], 7),
            Err(ConicError::DimensionMismatch(_))
        ));
        assert!(p.add_equality(vec![(5, 1.0)], 0.0).is_err());
        assert!(p.add_second_order_cone(vec![]).is_err());
    }

    #[test]
    fn text_dump_lists_everything() {
        let mut p = ConicProgram::new(3);
        p.set_cost(0, 1.0).unwrap();
        p.add_norm_epigraph(&LinearMap::identity(1..3), &[3.0, 4.0], 0)
            .unwrap();
        p.add_equality(vec![(1, 1.0)], 0.0).unwrap();
        let text = p.to_text();
        assert!(text.starts_with("conic n=3 p=1 cones=1"));
        assert!(text.contains("cone 0 soc 3"));
        assert!(text.contains("h 0 2 4e0"));
    }
}
