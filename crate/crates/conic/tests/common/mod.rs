//! Random test instances and an independent first-order oracle.
//!
//! Family: minimize qᵀx + Σ w_g ‖A_g x − b_g‖ + ρ‖x − x̄‖²
//! subject to E x = r and x_j ≥ l_j for a subset of coordinates.
//! The oracle eliminates the equalities through an orthonormal null-space
//! basis and runs accelerated primal-dual hybrid gradient on the rest.

#![allow(dead_code)]

use conic::{AffineExpr, ConicProgram, LinearMap};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Group {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub q: DVector<f64>,
    pub groups: Vec<Group>,
    pub rho: f64,
    pub xbar: DVector<f64>,
    pub e: DMatrix<f64>,
    pub r: DVector<f64>,
    /// `(index, lower bound)`.
    pub bounds: Vec<(usize, f64)>,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Sum of uniforms is plenty for test data.
    (0..4).map(|_| rng.gen::<f64>() - 0.5).sum::<f64>()
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, max_n: usize) -> Self {
        let n = rng.gen_range(2..=max_n);
        let num_groups = rng.gen_range(1..=6);
        let x_feas = DVector::from_fn(n, |_, _| gauss(rng));
        let groups = (0..num_groups)
            .map(|_| {
                let rows = rng.gen_range(1..=3);
                Group {
                    a: DMatrix::from_fn(rows, n, |_, _| gauss(rng)),
                    b: DVector::from_fn(rows, |_, _| gauss(rng)),
                    w: rng.gen_range(0.2..2.0),
                }
            })
            .collect();
        let p = rng.gen_range(0..=2.min(n - 1));
        let e = DMatrix::from_fn(p, n, |_, _| gauss(rng));
        let r = &e * &x_feas;
        let mut bounds = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.3) {
                bounds.push((j, x_feas[j] - rng.gen_range(0.05..1.0)));
            }
        }
        Self {
            n,
            q: DVector::from_fn(n, |_, _| 0.5 * gauss(rng)),
            groups,
            rho: rng.gen_range(0.1..2.0),
            xbar: DVector::from_fn(n, |_, _| gauss(rng)),
            e,
            r,
            bounds,
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.q.dot(x) + self.rho * (x - &self.xbar).norm_squared();
        for g in &self.groups {
            v += g.w * (&g.a * x - &g.b).norm();
        }
        v
    }

    /// Conic form: variables `[x, t_1..t_G, e]`.
    pub fn to_program(&self) -> ConicProgram {
        let n = self.n;
        let mut p = ConicProgram::new(n);
        for j in 0..n {
            p.set_cost(j, self.q[j]).unwrap();
        }
        for g in &self.groups {
            let t = p.add_variable();
            p.set_cost(t, g.w).unwrap();
            let data: Vec<f64> = (0..g.a.nrows())
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| g.a[(i, j)])
                .collect();
            let map = LinearMap::from_dense(&data, g.a.nrows(), n, 0);
            let offset: Vec<f64> = g.b.iter().map(|v| -v).collect();
            p.add_norm_epigraph(&map, &offset, t).unwrap();
        }
        let e = p.add_variable();
        p.set_cost(e, self.rho).unwrap();
        let offset: Vec<f64> = self.xbar.iter().map(|v| -v).collect();
        p.add_square_epigraph(&LinearMap::identity(0..n), &offset, e).unwrap();
        for i in 0..self.e.nrows() {
            let terms = (0..n).map(|j| (j, self.e[(i, j)])).collect();
            p.add_equality(terms, self.r[i]).unwrap();
        }
        for &(j, l) in &self.bounds {
            p.add_nonnegative(AffineExpr::new(vec![(j, 1.0)], -l)).unwrap();
        }
        p
    }
}

/// Accelerated PDHG on the null-space parametrization. Returns the minimizer.
pub fn pdhg_oracle(inst: &Instance, iterations: usize) -> DVector<f64> {
    let n = inst.n;
    // x = x_p + N ξ with x_p in the row space of E and N orthonormal.
    let (x_p, basis) = if inst.e.nrows() == 0 {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        let svd = inst.e.transpose().svd(true, false);
        let u = svd.u.unwrap();
        let full = u.clone().resize(n, n, 0.0);
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-10).count();
        // Complete the column space of Eᵀ to an orthonormal basis of Rⁿ.
        let mut cols: Vec<DVector<f64>> = (0..rank).map(|k| full.column(k).into_owned()).collect();
        for k in 0..n {
            let mut v = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
            let nv = v.norm();
            if nv > 1e-6 {
                cols.push(v / nv);
            }
            if cols.len() == n {
                break;
            }
        }
        let null: Vec<DVector<f64>> = cols[rank..].to_vec();
        let basis = DMatrix::from_columns(&null);
        let x_p = inst
            .e
            .clone()
            .svd(true, true)
            .solve(&inst.r, 1e-12)
            .expect("least-norm solution");
        (x_p, basis)
    };
    let m = basis.ncols();
    // Rows of K: group maps then bound selectors.
    let mut blocks: Vec<(DMatrix<f64>, DVector<f64>, f64)> = Vec::new();
    for g in &inst.groups {
        blocks.push((&g.a * &basis, &g.b - &g.a * &x_p, g.w));
    }
    let k_rows: usize = blocks.iter().map(|b| b.0.nrows()).sum::<usize>() + inst.bounds.len();
    let mut k = DMatrix::zeros(k_rows, m);
    let mut row = 0;
    for b in &blocks {
        k.view_mut((row, 0), (b.0.nrows(), m)).copy_from(&b.0);
        row += b.0.nrows();
    }
    let mut lower = Vec::new();
    for &(j, l) in &inst.bounds {
        k.row_mut(row).copy_from(&basis.row(j));
        lower.push(l - x_p[j]);
        row += 1;
    }
    let norm_k = k.norm().max(1e-12);
    // Shift of the quadratic: ρ‖x_p + Nξ − x̄‖² = ρ‖ξ − ξ̄‖² + const.
    let xi_bar = basis.tr_mul(&(&inst.xbar - &x_p));
    let q_xi = basis.tr_mul(&inst.q);
    let gamma = 2.0 * inst.rho;

    let mut tau = 1.0 / norm_k;
    let mut sigma = 1.0 / norm_k;
    let mut xi = xi_bar.clone();
    let mut xi_bar_step = xi.clone();
    let mut y = DVector::zeros(k_rows);
    for _ in 0..iterations {
        // Dual step: prox of σF* via Moreau.
        let v = &y + sigma * (&k * &xi_bar_step);
        let mut y_new = v.clone();
        let mut row = 0;
        for b in &blocks {
            let d = b.0.nrows();
            let u = v.rows(row, d) / sigma;
            let diff = &u - &b.1;
            let nd = diff.norm();
            let shrink = b.2 / sigma;
            let p = if nd > shrink { &b.1 + diff * (1.0 - shrink / nd) } else { b.1.clone() };
            y_new.rows_mut(row, d).copy_from(&(v.rows(row, d) - sigma * p));
            row += d;
        }
        for (i, &l) in lower.iter().enumerate() {
            let u = v[row + i] / sigma;
            y_new[row + i] = v[row + i] - sigma * u.max(l);
        }
        y = y_new;
        // Primal step: prox of τG with G(ξ) = qᵀNξ + ρ‖ξ − ξ̄‖².
        let w = &xi - tau * k.tr_mul(&y);
        let xi_new = (w / tau + gamma * &xi_bar - &q_xi) / (1.0 / tau + gamma);
        let theta = 1.0 / (1.0 + gamma * tau).sqrt();
        tau *= theta;
        sigma /= theta;
        xi_bar_step = &xi_new + theta * (&xi_new - &xi);
        xi = xi_new;
    }
    let mut x = &x_p + &basis * &xi;
    // Bounds are met only asymptotically; clamp the tiny residual.
    for &(j, l) in &inst.bounds {
        x[j] = x[j].max(l);
    }
    x
}
