//! Primal–dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra predictor–corrector steps.
//!
//! Each Newton system
//!
//! ```text
//! [ 0  Aᵀ  Gᵀ  ] [dx]   [r1]
//! [ A  0   0   ] [dy] = [r2]
//! [ G  0  −W²  ] [dz]   [r3]
//! ```
//!
//! is reduced to the dense normal matrix `H = Gᵀ W⁻² G` (plus a Schur
//! complement on `A` when equalities are present), factored by Cholesky with
//! a small static regularization, and polished by iterative refinement
//! against the unregularized system.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cone::{Cones, Scaling};
use crate::presolve::{Presolved, StandardForm, Trivial};
use crate::program::ConicProgram;
use crate::ConicError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Feasibility and duality-gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Ruiz equilibration passes.
    pub equilibration_passes: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            equilibration_passes: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    /// Primal infeasible; `y`, `z` hold a Farkas certificate.
    Infeasible,
    /// Dual infeasible; `x` holds an improving ray.
    Unbounded,
    MaxIter,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIter => "max_iter",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the iteration log (scaled problem).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInfo {
    pub iter: usize,
    pub pcost: f64,
    pub dcost: f64,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    pub mu: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Equality multipliers, one per equality in program order.
    pub y: Vec<f64>,
    /// Cone multipliers, flattened over cone rows in program order.
    pub z: Vec<f64>,
    /// Cone slacks, i.e. the cone-row expressions evaluated at `x`.
    pub s: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Largest constraint violation of `x` in the original program.
    pub primal_residual: f64,
    /// `‖Aᵀy + Gᵀz + c‖∞` in the original program.
    pub dual_residual: f64,
    /// `|objective − dual_objective| / max(1, |objective|)`.
    pub gap: f64,
    pub iterations: usize,
    pub trace: Vec<IterationInfo>,
}

impl ConicSolution {
    /// Complementarity `sᵀz` in original units.
    pub fn complementarity(&self) -> f64 {
        self.s.iter().zip(&self.z).map(|(a, b)| a * b).sum()
    }
}

/// Solves `program` to the given tolerance.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    let orig = StandardForm::from_program(program);
    let pre = match Presolved::new(&orig, settings.equilibration_passes) {
        Ok(p) => p,
        Err(Trivial::Infeasible) => {
            let n = program.num_vars();
            return Ok(ConicSolution {
                status: SolveStatus::Infeasible,
                x: vec![0.0; n],
                y: vec![0.0; orig.a.nrows()],
                z: vec![0.0; orig.g.nrows()],
                s: orig.h.iter().copied().collect(),
                objective: f64::NAN,
                dual_objective: f64::NAN,
                primal_residual: f64::INFINITY,
                dual_residual: f64::NAN,
                gap: f64::NAN,
                iterations: 0,
                trace: Vec::new(),
            });
        }
    };
    // The stopping test runs on the equilibrated problem, whose gap can
    // differ from the gap in original units. Tighten and re-solve until the
    // reported gap meets the tolerance, keeping the last acceptable answer
    // if a tighter attempt breaks down.
    let mut inner = *settings;
    let mut best = finish(program, &orig, &pre, interior_point(&pre.scaled, &inner)?, settings);
    for _ in 0..REFINE_ATTEMPTS {
        if best.status != SolveStatus::Optimal || best.gap <= settings.tol {
            break;
        }
        inner.tol /= 10.0;
        match interior_point(&pre.scaled, &inner) {
            Ok(raw) if raw.status == SolveStatus::Optimal => {
                let next = finish(program, &orig, &pre, raw, settings);
                if next.status == SolveStatus::Optimal && next.gap <= best.gap {
                    best = next;
                }
            }
            _ => break,
        }
    }
    Ok(best)
}

/// Re-solves with a ten times tighter inner tolerance at most this often.
const REFINE_ATTEMPTS: usize = 2;

fn finish(
    program: &ConicProgram,
    orig: &StandardForm,
    pre: &Presolved,
    raw: RawSolution,
    settings: &SolverSettings,
) -> ConicSolution {
    let (x, y, z, s) = pre.postsolve(orig, &raw.x, &raw.y, &raw.z, &raw.s);

    let mut status = raw.status;
    let objective = program.objective_value(x.as_slice());
    let dual_objective = -(orig.b.dot(&y) + orig.h.dot(&z)) + program.objective_constant();
    let primal_residual = program.max_violation(x.as_slice());
    let dual_residual = (orig.a.tr_mul(&y) + orig.g.tr_mul(&z) + &orig.c).amax();
    let gap = (objective - dual_objective).abs() / objective.abs().max(1.0);

    if status == SolveStatus::Optimal {
        // Rows dropped as dependent must still be satisfied.
        for &i in pre.dependent_rows() {
            let lhs = orig.a.row(i).dot(&x.transpose());
            if (lhs - orig.b[i]).abs() > 10.0 * settings.tol * (1.0 + orig.b[i].abs()) {
                status = SolveStatus::Infeasible;
            }
        }
    }

    ConicSolution {
        status,
        x: x.iter().copied().collect(),
        y: y.iter().copied().collect(),
        z: z.iter().copied().collect(),
        s: s.iter().copied().collect(),
        objective,
        dual_objective,
        primal_residual,
        dual_residual,
        gap,
        iterations: raw.iterations,
        trace: raw.trace,
    }
}

struct RawSolution {
    status: SolveStatus,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    iterations: usize,
    trace: Vec<IterationInfo>,
}

/// Factored reduced KKT system for one scaling.
struct Kkt<'a> {
    form: &'a StandardForm,
    scaling: Option<&'a Scaling>,
    /// `W⁻¹ G`.
    v: DMatrix<f64>,
    chol_h: Cholesky<f64, Dyn>,
    /// `H⁻¹ Aᵀ` and the Cholesky factor of `A H⁻¹ Aᵀ`.
    hinv_at: DMatrix<f64>,
    chol_s: Option<Cholesky<f64, Dyn>>,
}

const REFINEMENT_STEPS: usize = 4;

impl<'a> Kkt<'a> {
    fn factor(form: &'a StandardForm, scaling: Option<&'a Scaling>, reg: f64) -> Option<Self> {
        let (m, n) = form.g.shape();
        let mut v = form.g.clone();
        if let Some(w) = scaling {
            w.apply_inverse_columns(v.as_mut_slice(), m);
        }
        let vt = v.transpose();
        let mut hmat = &vt * &v;
        let dmax = (0..n).map(|i| hmat[(i, i)]).fold(0.0, f64::max).max(1.0);
        for i in 0..n {
            hmat[(i, i)] += reg * dmax;
        }
        let chol_h = Cholesky::new(hmat)?;
        let p = form.a.nrows();
        let (hinv_at, chol_s) = if p > 0 {
            let hinv_at = chol_h.solve(&form.a.transpose());
            let mut smat = &form.a * &hinv_at;
            let smax = (0..p).map(|i| smat[(i, i)]).fold(0.0, f64::max).max(1e-300);
            for i in 0..p {
                smat[(i, i)] += reg * smax;
            }
            (hinv_at, Some(Cholesky::new(smat)?))
        } else {
            (DMatrix::zeros(n, 0), None)
        };
        Some(Self {
            form,
            scaling,
            v,
            chol_h,
            hinv_at,
            chol_s,
        })
    }

    fn w_apply(&self, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        match self.scaling {
            Some(w) => {
                let mut out = DVector::zeros(v.len());
                w.apply(v.as_slice(), out.as_mut_slice(), inverse);
                out
            }
            None => v.clone(),
        }
    }

    fn solve_reduced(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let t = self.w_apply(r3, true);
        let r1p = r1 + self.v.tr_mul(&t);
        let (dx, dy) = match &self.chol_s {
            Some(cs) => {
                let rhs = self.hinv_at.tr_mul(&r1p) - r2;
                let dy = cs.solve(&rhs);
                let dx = self.chol_h.solve(&(&r1p - self.form.a.tr_mul(&dy)));
                (dx, dy)
            }
            None => (self.chol_h.solve(&r1p), DVector::zeros(0)),
        };
        let dz = self.w_apply(&(&self.v * &dx - t), true);
        (dx, dy, dz)
    }

    fn solve(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (mut dx, mut dy, mut dz) = self.solve_reduced(r1, r2, r3);
        let f = self.form;
        let scale = 1.0 + r1.amax().max(r2.amax()).max(r3.amax());
        for _ in 0..REFINEMENT_STEPS {
            let e1 = r1 - (f.a.tr_mul(&dy) + f.g.tr_mul(&dz));
            let e2 = r2 - &f.a * &dx;
            let w2dz = self.w_apply(&self.w_apply(&dz, false), false);
            let e3 = r3 - (&f.g * &dx - w2dz);
            let err = e1.amax().max(e2.amax()).max(e3.amax());
            if err <= 1e-14 * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_reduced(&e1, &e2, &e3);
            dx += cx;
            dy += cy;
            dz += cz;
        }
        (dx, dy, dz)
    }
}

fn factor_with_retry<'a>(form: &'a StandardForm, scaling: Option<&'a Scaling>) -> Option<Kkt<'a>> {
    let mut reg = 1e-14;
    for _ in 0..7 {
        if let Some(k) = Kkt::factor(form, scaling, reg) {
            return Some(k);
        }
        reg *= 100.0;
    }
    None
}

fn shift_into_cone(cones: &Cones, v: &mut DVector<f64>) {
    let alpha = cones.min_shift(v.as_slice());
    if alpha >= -1e-8 {
        let e = cones.identity();
        for (vi, ei) in v.iter_mut().zip(e) {
            *vi += (1.0 + alpha) * ei;
        }
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dz: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

fn interior_point(f: &StandardForm, settings: &SolverSettings) -> Result<RawSolution, ConicError> {
    let (m, n) = f.g.shape();
    let p = f.a.nrows();
    let cones = &f.cones;
    let nu = cones.degree() as f64;
    let tol = settings.tol;
    let mut trace = Vec::new();

    let fail = |msg: &str, trace: &Vec<IterationInfo>| ConicError::NumericalFailure {
        message: msg.to_string(),
        trace: trace.clone(),
    };

    // Initial point from two least-squares solves with W = I.
    let kkt0 = factor_with_retry(f, None).ok_or_else(|| fail("initial factorization failed", &trace))?;
    let (mut x, _, zp) = kkt0.solve(&DVector::zeros(n), &f.b, &f.h);
    let mut s = -zp;
    shift_into_cone(cones, &mut s);
    let (_, mut y, mut z) = kkt0.solve(&(-&f.c), &DVector::zeros(p), &DVector::zeros(m));
    shift_into_cone(cones, &mut z);
    let mut tau = 1.0;
    let mut kappa = 1.0;
    drop(kkt0);

    let bnorm = 1f64.max(f.b.norm()).max(f.h.norm());
    let cnorm = 1f64.max(f.c.norm());
    let e = DVector::from_vec(cones.identity());
    let mut last_step = 0.0;

    for iter in 0..=settings.max_iter {
        let rx = f.a.tr_mul(&y) + f.g.tr_mul(&z) + &f.c * tau;
        let ry = &f.a * &x - &f.b * tau;
        let rz = &s + &f.g * &x - &f.h * tau;
        let cx = f.c.dot(&x);
        let by_hz = f.b.dot(&y) + f.h.dot(&z);
        let rt = kappa + cx + by_hz;
        let sz = s.dot(&z);
        let mu = (sz + tau * kappa) / (nu + 1.0);

        let pcost = cx / tau;
        let dcost = -by_hz / tau;
        let pres = ry.norm().max(rz.norm()) / tau / bnorm;
        let dres = rx.norm() / tau / cnorm;
        let gap = sz / (tau * tau);
        let rel_gap = gap / pcost.abs().max(1.0);
        trace.push(IterationInfo {
            iter,
            pcost,
            dcost,
            pres,
            dres,
            gap,
            mu,
            step: last_step,
        });
        if !(mu.is_finite() && pres.is_finite() && dres.is_finite()) {
            return Err(fail("non-finite iterate", &trace));
        }

        let done = |status: SolveStatus, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, s: &DVector<f64>, d: f64, trace: Vec<IterationInfo>| RawSolution {
            status,
            x: x / d,
            y: y / d,
            z: z / d,
            s: s / d,
            iterations: iter,
            trace,
        };

        if pres <= tol && dres <= tol && rel_gap <= tol {
            return Ok(done(SolveStatus::Optimal, &x, &y, &z, &s, tau, trace));
        }
        if by_hz < 0.0 {
            let atyz = (f.a.tr_mul(&y) + f.g.tr_mul(&z)).norm();
            if atyz <= tol * (-by_hz) && tau < kappa {
                return Ok(done(SolveStatus::Infeasible, &x, &y, &z, &s, -by_hz, trace));
            }
        }
        if cx < 0.0 {
            let res = (&f.a * &x).norm().max((&f.g * &x + &s).norm());
            if res <= tol * (-cx) && tau < kappa {
                return Ok(done(SolveStatus::Unbounded, &x, &y, &z, &s, -cx, trace));
            }
        }
        if iter == settings.max_iter {
            return Ok(done(SolveStatus::MaxIter, &x, &y, &z, &s, tau, trace));
        }

        let (scaling, lambda) = Scaling::compute(cones, s.as_slice(), z.as_slice())
            .ok_or_else(|| fail("iterate left the cone interior", &trace))?;
        let kkt = factor_with_retry(f, Some(&scaling)).ok_or_else(|| fail("KKT factorization failed", &trace))?;
        let (x1, y1, z1) = kkt.solve(&(-&f.c), &f.b, &f.h);
        let denom = -kappa / tau + f.c.dot(&x1) + f.b.dot(&y1) + f.h.dot(&z1);

        let direction = |sigma: f64, rs: &DVector<f64>, rk: f64| -> Direction {
            let mut ldiv = DVector::zeros(m);
            cones.divide(lambda.as_slice(), rs.as_slice(), ldiv.as_mut_slice());
            let mut wl = DVector::zeros(m);
            scaling.apply(ldiv.as_slice(), wl.as_mut_slice(), false);
            let r1 = &rx * (-(1.0 - sigma));
            let r2 = &ry * (-(1.0 - sigma));
            let r3 = &rz * (-(1.0 - sigma)) - &wl;
            let (x2, y2, z2) = kkt.solve(&r1, &r2, &r3);
            let num = -(1.0 - sigma) * rt - rk / tau - (f.c.dot(&x2) + f.b.dot(&y2) + f.h.dot(&z2));
            let dtau = num / denom;
            let dx = x2 + &x1 * dtau;
            let dy = y2 + &y1 * dtau;
            let dz = z2 + &z1 * dtau;
            let mut wdz = DVector::zeros(m);
            scaling.apply(dz.as_slice(), wdz.as_mut_slice(), false);
            let mut ds = DVector::zeros(m);
            scaling.apply((ldiv - wdz).as_slice(), ds.as_mut_slice(), false);
            let dkappa = (rk - kappa * dtau) / tau;
            Direction {
                dx,
                dy,
                dz,
                ds,
                dtau,
                dkappa,
            }
        };
        let max_step = |d: &Direction| -> f64 {
            let mut a = cones
                .max_step(s.as_slice(), d.ds.as_slice())
                .min(cones.max_step(z.as_slice(), d.dz.as_slice()));
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let mut ll = DVector::zeros(m);
        cones.product(lambda.as_slice(), lambda.as_slice(), ll.as_mut_slice());
        let rs_aff = -&ll;
        let aff = direction(0.0, &rs_aff, -kappa * tau);
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector with the second-order term.
        let mut ws = DVector::zeros(m);
        scaling.apply(aff.ds.as_slice(), ws.as_mut_slice(), true);
        let mut wz = DVector::zeros(m);
        scaling.apply(aff.dz.as_slice(), wz.as_mut_slice(), false);
        let mut corr = DVector::zeros(m);
        cones.product(ws.as_slice(), wz.as_slice(), corr.as_mut_slice());
        let rs = -&ll + &e * (sigma * mu) - corr;
        let rk = -kappa * tau + sigma * mu - aff.dtau * aff.dkappa;
        let d = direction(sigma, &rs, rk);
        let mut alpha = (0.99 * max_step(&d)).min(1.0);
        // Rounding can put a full fraction-to-boundary step on the boundary
        // of a thin cone; back off until both iterates are strictly inside.
        let mut tries = 0;
        while !(cones.is_interior((&s + &d.ds * alpha).as_slice()) && cones.is_interior((&z + &d.dz * alpha).as_slice())) {
            tries += 1;
            if tries > 40 {
                return Err(fail("no interior step", &trace));
            }
            alpha *= 0.5;
        }

        x += &d.dx * alpha;
        y += &d.dy * alpha;
        z += &d.dz * alpha;
        s += &d.ds * alpha;
        tau += alpha * d.dtau;
        kappa += alpha * d.dkappa;
        last_step = alpha;
    }
    unreachable!("loop returns at max_iter")
}
