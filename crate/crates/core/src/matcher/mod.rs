//! The outer matching loop: linearize the area term at the current
//! displacement, solve the cone subproblem, move, log, repeat.
//!
//! Everything runs on a copy of the problem scaled to a joint bounding-box
//! diagonal near one. Results are mapped back to input units.

mod distortion;
mod subproblem;

use conic::{solve, ConicError, SolveStatus, SolverSettings};
use nalgebra::{DVector, Vector2};
use serde::Serialize;
use thiserror::Error;

use crate::elasticity::{assemble_stiffness, schur_condense, ElasticityError, LameParams, SchurOperator};
use crate::geometry::{BBox, GeometryError, Point, Polygon, PolygonSet};
use crate::meshing::{order_nodes, triangulate, MeshError, MeshParams, NodeOrdering, TriMesh};
use crate::symdiff::{area_at, DeformedBoundary, SymdiffError, Warning};

pub use distortion::{
    add_distortion_constraints, conformal_distortion, frames, polar_angle, triangle_jacobian_maps, Distortion,
    JacobianMap,
};
pub use subproblem::{build_subproblem, linearized_fidelity, Fidelity, Layout, Linearization};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Symdiff(#[from] SymdiffError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchConfig {
    /// Weight of the squared area term. `None` picks
    /// `ALPHA_NUMERATOR/(A_S + A_T)²` in normalized units.
    pub alpha: Option<f64>,
    /// Weight of `‖u − u0‖²` in normalized units.
    pub beta: f64,
    /// Raise the localization weight after an iterate that grew the area,
    /// relax it back towards `beta` after one that shrank it.
    pub adapt_beta: bool,
    pub max_iters: usize,
    /// Stop once the symmetric difference is below this fraction of
    /// `area(S) + area(T)`.
    pub stop_fraction: f64,
    /// Finite-difference step of the area gradient, in normalized units.
    pub fd_step: f64,
    pub distortion_bound: Option<f64>,
    pub lame: LameParams,
    #[serde(skip)]
    pub solver: SolverSettings,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 1.0,
            adapt_beta: true,
            max_iters: 50,
            stop_fraction: 0.01,
            fd_step: 1e-3,
            distortion_bound: None,
            lame: LameParams::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl MatchConfig {
    fn validate(&self) -> Result<(), MatchError> {
        let bad = |m: String| Err(MatchError::InvalidInput(m));
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return bad(format!("alpha must be a nonnegative number, got {a}"));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be a nonnegative number, got {}", self.beta));
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction < 1.0) {
            return bad(format!("stop fraction must lie in (0, 1), got {}", self.stop_fraction));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad(format!("finite-difference step must be positive, got {}", self.fd_step));
        }
        if let Some(k) = self.distortion_bound {
            if !(k > 1.0 && k.is_finite()) {
                return bad(format!("distortion bound must exceed 1, got {k}"));
            }
        }
        if self.max_iters == 0 {
            return bad("at least one iteration is required".into());
        }
        Ok(())
    }
}

/// Maps input coordinates to the working frame, `x ↦ x / scale`. The scale
/// is the power of two nearest to the joint bounding-box diagonal, so the
/// map is exact in floating point and every quantity computed in the working
/// frame agrees bit for bit with the same computation in input units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Normalization {
    pub scale: f64,
}

impl Normalization {
    pub fn of(bb: &BBox) -> Self {
        let d = bb.diagonal();
        let scale = if d > 0.0 && d.is_finite() { 2f64.powi(d.log2().round() as i32) } else { 1.0 };
        Self { scale }
    }

    pub fn forward(&self, p: &Point) -> Point {
        Point::from(p.coords / self.scale)
    }

    pub fn inverse(&self, p: &Point) -> Point {
        Point::from(p.coords * self.scale)
    }
}

/// State of one accepted iterate. Areas and forces are in input units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub area_abs: f64,
    pub area_fraction: f64,
    pub force_norm: f64,
    pub max_cd: f64,
    pub mean_cd: f64,
    pub flipped: usize,
    /// Status of the solve that produced this iterate, `initial` for the
    /// starting configuration.
    pub solver_status: String,
    /// Area of the deformed source over the target area.
    pub area_ratio: f64,
    /// Whether the deformed boundary is a simple ring.
    pub simple: bool,
    /// Localization weight of the subproblem that produced this iterate.
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    SolverFailure,
    /// The source shrank to a small fraction of the target.
    Collapse,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::SolverFailure => "solver_failure",
            Termination::Collapse => "collapse",
        }
    }
}

/// The area pull has to beat the elastic force threshold at `u = 0`, where
/// the sum of force norms is not differentiable; much smaller weights leave
/// non-rigid targets stuck at the identity.
pub const ALPHA_NUMERATOR: f64 = 1e4;

const BETA_GROWTH: f64 = 4.0;
const BETA_RELAX: f64 = 2.0;

/// Below this area ratio a run is stopped as collapsed.
pub const COLLAPSE_RATIO: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct MatchResult {
    /// Boundary displacement in input units, interleaved in boundary-loop order.
    pub u_b: DVector<f64>,
    /// Interior displacements in input units, in system order.
    pub u_i: DVector<f64>,
    /// Per-node boundary forces `S u_B` in input units.
    pub forces: Vec<Vector2<f64>>,
    /// The starting configuration.
    pub initial: IterationRecord,
    pub log: Vec<IterationRecord>,
    /// Normalized boundary displacement of every logged iterate.
    pub history: Vec<DVector<f64>>,
    pub termination: Termination,
    /// Log index of the returned iterate, `None` for the starting one.
    pub returned: Option<usize>,
    pub failure: Option<String>,
    pub warnings: Vec<(usize, Warning)>,
    pub alpha: f64,
    pub beta: f64,
    pub normalization: Normalization,
    /// Source mesh in input units.
    pub mesh: TriMesh,
    pub ordering: NodeOrdering,
}

impl MatchResult {
    /// The returned iterate's record.
    pub fn final_record(&self) -> &IterationRecord {
        self.returned.map_or(&self.initial, |i| &self.log[i])
    }

    /// Source boundary in input units, in boundary-loop order.
    pub fn source(&self) -> Polygon {
        self.mesh.boundary_polygon()
    }

    /// Deformed source boundary in input units.
    pub fn deformed_source(&self) -> Polygon {
        self.source().displaced(self.u_b.as_slice())
    }
}

/// A source mesh with its condensed operator, paired with a target, all in
/// normalized units.
#[derive(Clone, Debug)]
pub struct MatchProblem {
    pub normalization: Normalization,
    /// Input-unit mesh, kept for reporting.
    pub mesh: TriMesh,
    pub ordering: NodeOrdering,
    pub source: Polygon,
    pub target: PolygonSet,
    pub schur: SchurOperator,
    pub jacobians: Vec<JacobianMap>,
    /// `area(S) + area(T)` in normalized units.
    pub total_area: f64,
}

impl MatchProblem {
    /// Meshes `source` with the default size and angle bounds.
    pub fn new(source: &Polygon, target: &PolygonSet, lame: LameParams) -> Result<Self, MatchError> {
        let source = source.to_ccw();
        let mesh = triangulate(&source, &MeshParams::for_polygon(&source))?;
        Self::with_mesh(mesh, target, lame)
    }

    /// Uses the given mesh. Its boundary loop is the source polygon.
    pub fn with_mesh(mesh: TriMesh, target: &PolygonSet, lame: LameParams) -> Result<Self, MatchError> {
        mesh.validate()?;
        target.validate()?;
        let input_source = mesh.boundary_polygon();
        let bb = match (input_source.bbox(), target.bbox()) {
            (Some(a), Some(b)) => a.union(&b),
            _ => return Err(MatchError::InvalidInput("source and target must be nonempty".into())),
        };
        let normalization = Normalization::of(&bb);
        let fwd = |p: &Point| normalization.forward(p);
        let norm_mesh = TriMesh {
            nodes: mesh.nodes.iter().map(fwd).collect(),
            ..mesh.clone()
        };
        let target = PolygonSet {
            rings: target
                .rings
                .iter()
                .map(|r| crate::geometry::Ring {
                    polygon: r.polygon.map(fwd),
                    role: r.role,
                })
                .collect(),
        };
        let ordering = order_nodes(&norm_mesh);
        let a = assemble_stiffness(&norm_mesh, &ordering, lame)?;
        let schur = schur_condense(&a)?;
        let jacobians = triangle_jacobian_maps(&norm_mesh, &ordering, &schur)?;
        let source = norm_mesh.boundary_polygon();
        let total_area = source.signed_area().abs() + target.area();
        Ok(Self {
            normalization,
            mesh,
            ordering,
            source,
            target,
            schur,
            jacobians,
            total_area,
        })
    }

    pub fn num_boundary(&self) -> usize {
        self.ordering.k
    }

    pub fn default_alpha(&self) -> f64 {
        ALPHA_NUMERATOR / (self.total_area * self.total_area)
    }

    /// Record of the normalized displacement `u`, reported in input units.
    pub fn evaluate(&self, u: &DVector<f64>, iter: usize, status: &str) -> Result<IterationRecord, MatchError> {
        let db = DeformedBoundary::new(self.source.clone(), u.clone())?;
        let area = area_at(&db, &self.target)?;
        let f = self.schur.apply(u);
        let force: f64 = (0..self.num_boundary()).map(|i| f[2 * i].hypot(f[2 * i + 1])).sum();
        let (mut max_cd, mut sum_cd, mut flipped) = (1.0f64, 0.0, 0);
        for m in &self.jacobians {
            let d = conformal_distortion(&m.eval(u));
            max_cd = max_cd.max(d.cd);
            sum_cd += d.cd;
            flipped += d.flipped as usize;
        }
        let s = self.normalization.scale;
        Ok(IterationRecord {
            iter,
            area_abs: area * s * s,
            area_fraction: area / self.total_area,
            force_norm: force * s,
            max_cd,
            mean_cd: sum_cd / self.jacobians.len().max(1) as f64,
            flipped,
            solver_status: status.to_string(),
            area_ratio: db.ring().signed_area().abs() / self.target.area(),
            simple: db.is_valid(),
            beta: 0.0,
        })
    }

    /// Per-node goal displacements of the closest-point fidelity: each node
    /// is pulled to the target point nearest to its current position.
    pub fn closest_point_goals(&self, u0: &DVector<f64>) -> DVector<f64> {
        let mut w = DVector::zeros(u0.len());
        for (i, s) in self.source.vertices().iter().enumerate() {
            let p = s + Vector2::new(u0[2 * i], u0[2 * i + 1]);
            let q = closest_point(&self.target, &p);
            w[2 * i] = q.x - s.x;
            w[2 * i + 1] = q.y - s.y;
        }
        w
    }
}

/// Nearest point to `p` on the boundary of `set`.
pub fn closest_point(set: &PolygonSet, p: &Point) -> Point {
    let mut best = (f64::INFINITY, *p);
    for ring in &set.rings {
        for (a, b) in ring.polygon.edges() {
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = a + t * ab;
            let d = (p - q).norm_squared();
            if d < best.0 {
                best = (d, q);
            }
        }
    }
    best.1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Linearized symmetric-difference area.
    Symdiff,
    /// Closest-point correspondences recomputed each iteration.
    ClosestPoint,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Symdiff => "symdiff",
            Method::ClosestPoint => "icp_like",
        }
    }
}

pub fn match_shapes(source: &Polygon, target: &PolygonSet, cfg: &MatchConfig) -> Result<MatchResult, MatchError> {
    cfg.validate()?;
    run(&MatchProblem::new(source, target, cfg.lame)?, cfg, Method::Symdiff)
}

/// Baseline with closest-point correspondences in place of the area term.
pub fn icp_like_match(source: &Polygon, target: &PolygonSet, cfg: &MatchConfig) -> Result<MatchResult, MatchError> {
    cfg.validate()?;
    run(&MatchProblem::new(source, target, cfg.lame)?, cfg, Method::ClosestPoint)
}

/// Runs the outer loop on a prepared problem.
pub fn run(problem: &MatchProblem, cfg: &MatchConfig, method: Method) -> Result<MatchResult, MatchError> {
    cfg.validate()?;
    let k = problem.num_boundary();
    let alpha = cfg.alpha.unwrap_or_else(|| problem.default_alpha());
    let mut u0 = DVector::zeros(2 * k);
    let initial = problem.evaluate(&u0, 0, "initial")?;
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut failure = None;
    let mut beta = cfg.beta;
    let termination = loop {
        let iter = log.len() + 1;
        let db = DeformedBoundary::new(problem.source.clone(), u0.clone())?;
        let lin;
        let goals;
        let fidelity = match method {
            Method::Symdiff => {
                lin = linearized_fidelity(&db, &problem.target, cfg.fd_step)?;
                if let Some(w) = lin.warning {
                    warnings.push((iter, w));
                }
                Fidelity::Area(&lin)
            }
            Method::ClosestPoint => {
                goals = problem.closest_point_goals(&u0);
                Fidelity::ClosestPoint(&goals)
            }
        };
        let (mut program, layout) = build_subproblem(&problem.schur, &u0, fidelity, alpha, beta)?;
        if let Some(bound) = cfg.distortion_bound {
            let theta = frames(&problem.jacobians, &u0);
            add_distortion_constraints(&mut program, layout.u.clone(), &problem.jacobians, bound, &theta)?;
        }
        match solve(&program, &cfg.solver) {
            Ok(sol) if sol.status == SolveStatus::Optimal => {
                u0 = DVector::from_column_slice(&sol.x[layout.u.clone()]);
            }
            Ok(sol) => {
                failure = Some(format!("iteration {iter}: solver stopped with status {}", sol.status.as_str()));
                break Termination::SolverFailure;
            }
            Err(e) => {
                failure = Some(format!("iteration {iter}: {e}"));
                break Termination::SolverFailure;
            }
        }
        let mut record = problem.evaluate(&u0, iter, SolveStatus::Optimal.as_str())?;
        record.beta = beta;
        let (fraction, ratio) = (record.area_fraction, record.area_ratio);
        if cfg.adapt_beta && cfg.beta > 0.0 {
            let previous = log.last().map_or(initial.area_fraction, |r| r.area_fraction);
            beta = if fraction > previous { BETA_GROWTH * beta } else { (beta / BETA_RELAX).max(cfg.beta) };
        }
        log.push(record);
        history.push(u0.clone());
        if fraction < cfg.stop_fraction {
            break Termination::Converged;
        }
        if ratio < COLLAPSE_RATIO {
            break Termination::Collapse;
        }
        if iter >= cfg.max_iters {
            break Termination::MaxIters;
        }
    };
    // A failed solve returns the best iterate seen; otherwise the last one.
    let returned = match termination {
        Termination::SolverFailure => log
            .iter()
            .enumerate()
            .filter(|(_, r)| r.area_fraction < initial.area_fraction)
            .min_by(|a, b| a.1.area_fraction.total_cmp(&b.1.area_fraction))
            .map(|(i, _)| i),
        _ => log.len().checked_sub(1),
    };
    let u_norm = returned.map_or_else(|| DVector::zeros(2 * k), |i| history[i].clone());
    let scale = problem.normalization.scale;
    let f = problem.schur.apply(&u_norm) * scale;
    Ok(MatchResult {
        u_b: &u_norm * scale,
        u_i: problem.schur.interior(&u_norm) * scale,
        forces: (0..k).map(|i| Vector2::new(f[2 * i], f[2 * i + 1])).collect(),
        initial,
        log,
        history,
        termination,
        returned,
        failure,
        warnings,
        alpha,
        beta: cfg.beta,
        normalization: problem.normalization,
        mesh: problem.mesh.clone(),
        ordering: problem.ordering.clone(),
    })
}
