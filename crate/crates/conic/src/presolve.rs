//! Dense standard form, presolve and Ruiz equilibration.
//!
//! Standard form:
//!
//! ```text
//! minimize cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K
//! ```
//!
//! with dual `Aᵀy + Gᵀz + c = 0, z ∈ K`.

use nalgebra::{DMatrix, DVector};

use crate::cone::{Block, Cones};
use crate::program::{ConeKind, ConicProgram};

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cones: Cones,
}

impl StandardForm {
    pub fn from_program(program: &ConicProgram) -> Self {
        let n = program.num_vars();
        let p = program.equalities().len();
        let m: usize = program.cones().iter().map(|c| c.rows.len()).sum();
        let mut a = DMatrix::zeros(p, n);
        let mut b = DVector::zeros(p);
        for (i, eq) in program.equalities().iter().enumerate() {
            for &(j, v) in &eq.terms {
                a[(i, j)] += v;
            }
            b[i] = eq.rhs;
        }
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        let mut blocks: Vec<Block> = Vec::new();
        let mut row = 0;
        for cone in program.cones() {
            let dim = cone.rows.len();
            for (k, expr) in cone.rows.iter().enumerate() {
                for &(j, v) in &expr.terms {
                    g[(row + k, j)] -= v;
                }
                h[row + k] = expr.constant;
            }
            match cone.kind {
                ConeKind::NonNegative => match blocks.last_mut() {
                    Some(Block::NonNeg { start, dim: d }) if *start + *d == row => *d += dim,
                    _ => blocks.push(Block::NonNeg { start: row, dim }),
                },
                ConeKind::SecondOrder => blocks.push(Block::Soc { start: row, dim }),
            }
            row += dim;
        }
        Self {
            c: DVector::from_column_slice(program.objective()),
            a,
            b,
            g,
            h,
            cones: Cones { blocks },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FixedVar {
    var: usize,
    row: usize,
    value: f64,
}

/// Outcome of presolve when the equalities alone decide the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trivial {
    Infeasible,
}

#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    /// Reduced and equilibrated problem handed to the interior-point loop.
    pub scaled: StandardForm,
    kept_vars: Vec<usize>,
    kept_rows: Vec<usize>,
    dependent_rows: Vec<usize>,
    fixed: Vec<FixedVar>,
    col_scale: Vec<f64>,
    row_scale_a: Vec<f64>,
    row_scale_g: Vec<f64>,
    cost_scale: f64,
}

const ZERO_ROW_TOL: f64 = 1e-12;

impl Presolved {
    pub fn new(orig: &StandardForm, passes: usize) -> Result<Self, Trivial> {
        let (p, n) = orig.a.shape();
        let m = orig.g.nrows();
        let mut b = orig.b.clone();
        let mut h = orig.h.clone();
        let mut row_active = vec![true; p];
        let mut col_active = vec![true; n];
        let mut fixed = Vec::new();
        let b_scale = 1.0 + orig.b.amax();

        // Singleton rows fix a variable; empty rows must be consistent.
        loop {
            let mut changed = false;
            for i in 0..p {
                if !row_active[i] {
                    continue;
                }
                let nz: Vec<usize> = (0..n)
                    .filter(|&j| col_active[j] && orig.a[(i, j)] != 0.0)
                    .collect();
                match nz.len() {
                    0 => {
                        if b[i].abs() > ZERO_ROW_TOL * b_scale {
                            return Err(Trivial::Infeasible);
                        }
                        row_active[i] = false;
                    }
                    1 => {
                        let j = nz[0];
                        let value = b[i] / orig.a[(i, j)];
                        for k in 0..p {
                            if row_active[k] && k != i {
                                b[k] -= orig.a[(k, j)] * value;
                            }
                        }
                        for r in 0..m {
                            h[r] -= orig.g[(r, j)] * value;
                        }
                        row_active[i] = false;
                        col_active[j] = false;
                        fixed.push(FixedVar { var: j, row: i, value });
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }

        let kept_vars: Vec<usize> = (0..n).filter(|&j| col_active[j]).collect();
        let candidate_rows: Vec<usize> = (0..p).filter(|&i| row_active[i]).collect();

        // Drop linearly dependent equality rows (modified Gram–Schmidt).
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut kept_rows = Vec::new();
        let mut dependent_rows = Vec::new();
        for &i in &candidate_rows {
            let row = DVector::from_iterator(kept_vars.len(), kept_vars.iter().map(|&j| orig.a[(i, j)]));
            let norm0 = row.norm();
            let mut r = row.clone();
            for q in &basis {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
            }
            let nr = r.norm();
            if nr > 1e-9 * norm0 {
                basis.push(r / nr);
                kept_rows.push(i);
            } else {
                dependent_rows.push(i);
            }
        }

        let nk = kept_vars.len();
        let pk = kept_rows.len();
        let mut a = DMatrix::from_fn(pk, nk, |i, j| orig.a[(kept_rows[i], kept_vars[j])]);
        let mut g = DMatrix::from_fn(m, nk, |r, j| orig.g[(r, kept_vars[j])]);
        let mut bk = DVector::from_fn(pk, |i, _| b[kept_rows[i]]);
        let mut c = DVector::from_fn(nk, |j, _| orig.c[kept_vars[j]]);

        // Ruiz equilibration; a second-order cone block shares one row scale.
        let mut col_scale = vec![1.0; nk];
        let mut row_scale_a = vec![1.0; pk];
        let mut row_scale_g = vec![1.0; m];
        for _ in 0..passes {
            let mut dcol = vec![1.0; nk];
            for (j, d) in dcol.iter_mut().enumerate() {
                let norm = a.column(j).amax().max(g.column(j).amax());
                if norm > 0.0 {
                    *d = 1.0 / norm.sqrt();
                }
            }
            let mut da = vec![1.0; pk];
            for (i, d) in da.iter_mut().enumerate() {
                let norm = a.row(i).amax();
                if norm > 0.0 {
                    *d = 1.0 / norm.sqrt();
                }
            }
            let mut dg = vec![1.0; m];
            for blk in &orig.cones.blocks {
                match *blk {
                    Block::NonNeg { start, dim } => {
                        for r in start..start + dim {
                            let norm = g.row(r).amax();
                            if norm > 0.0 {
                                dg[r] = 1.0 / norm.sqrt();
                            }
                        }
                    }
                    Block::Soc { start, dim } => {
                        let norm = (start..start + dim).map(|r| g.row(r).amax()).fold(0.0, f64::max);
                        if norm > 0.0 {
                            dg[start..start + dim].fill(1.0 / norm.sqrt());
                        }
                    }
                }
            }
            for j in 0..nk {
                for i in 0..pk {
                    a[(i, j)] *= da[i] * dcol[j];
                }
                for r in 0..m {
                    g[(r, j)] *= dg[r] * dcol[j];
                }
                col_scale[j] *= dcol[j];
            }
            for i in 0..pk {
                row_scale_a[i] *= da[i];
            }
            for r in 0..m {
                row_scale_g[r] *= dg[r];
            }
        }
        for i in 0..pk {
            bk[i] *= row_scale_a[i];
        }
        let hk = DVector::from_fn(m, |r, _| h[r] * row_scale_g[r]);
        for j in 0..nk {
            c[j] *= col_scale[j];
        }
        // Power-of-two cost normalization: exact, and positive multiples of
        // the cost vector map to (nearly) the same scaled problem.
        let cmax = c.amax();
        let cost_scale = if cmax > 0.0 { 2f64.powi(cmax.log2().round() as i32) } else { 1.0 };
        c /= cost_scale;

        Ok(Self {
            scaled: StandardForm {
                c,
                a,
                b: bk,
                g,
                h: hk,
                cones: orig.cones.clone(),
            },
            kept_vars,
            kept_rows,
            dependent_rows,
            fixed,
            col_scale,
            row_scale_a,
            row_scale_g,
            cost_scale,
        })
    }

    /// Maps a scaled primal/dual point back to the original variables.
    /// Returns `(x, y, z, s)`.
    pub fn postsolve(
        &self,
        orig: &StandardForm,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
        s: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let (p, n) = orig.a.shape();
        let m = orig.g.nrows();
        let mut xo = DVector::zeros(n);
        for (k, &j) in self.kept_vars.iter().enumerate() {
            xo[j] = x[k] * self.col_scale[k];
        }
        for f in &self.fixed {
            xo[f.var] = f.value;
        }
        let zo = DVector::from_fn(m, |r, _| z[r] * self.row_scale_g[r] * self.cost_scale);
        let so = DVector::from_fn(m, |r, _| s[r] / self.row_scale_g[r]);
        let mut yo = DVector::zeros(p);
        for (k, &i) in self.kept_rows.iter().enumerate() {
            yo[i] = y[k] * self.row_scale_a[k] * self.cost_scale;
        }
        let gtz = orig.g.tr_mul(&zo);
        for f in self.fixed.iter().rev() {
            let j = f.var;
            let mut acc = orig.c[j] + gtz[j];
            for k in 0..p {
                if k != f.row {
                    acc += orig.a[(k, j)] * yo[k];
                }
            }
            yo[f.row] = -acc / orig.a[(f.row, j)];
        }
        (xo, yo, zo, so)
    }

    pub fn dependent_rows(&self) -> &[usize] {
        &self.dependent_rows
    }
}
