//! P1 linear elasticity: stiffness assembly in boundary-first order, static
//! condensation onto the boundary, and recovery of interior displacements.
//!
//! Displacements are interleaved per node, `(u_1x, u_1y, u_2x, u_2y, ...)`,
//! boundary nodes first.

mod dump;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use thiserror::Error;

use crate::meshing::{NodeOrdering, TriMesh};

#[derive(Debug, Error)]
pub enum ElasticityError {
    #[error("invalid Lamé parameters: {0}")]
    InvalidParams(String),
    #[error("triangle {index} is degenerate")]
    DegenerateTriangle { index: usize },
    #[error("interior block is not positive definite")]
    SingularInterior,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LameParams {
    pub mu: f64,
    pub lambda: f64,
}

impl LameParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self, ElasticityError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(ElasticityError::InvalidParams(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ElasticityError::InvalidParams(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self { mu, lambda })
    }
}

impl Default for LameParams {
    fn default() -> Self {
        Self { mu: 1.0, lambda: 0.0 }
    }
}

/// Which weak form to discretize.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BilinearForm {
    /// `2μ ε(u):ε(v) + λ div u div v`. Rigid motions have zero energy.
    #[default]
    Strain,
    /// `μ ∇u:∇v + (λ+μ) div u div v`. Same Navier–Lamé operator in the
    /// interior, but infinitesimal rotations carry energy `2μ|Ω|`.
    GradDiv,
}

/// Gradients of the three P1 hat functions and the triangle area.
pub fn hat_gradients(p: [nalgebra::Point2<f64>; 3]) -> ([Vector2<f64>; 3], f64) {
    let area = 0.5 * (p[1] - p[0]).perp(&(p[2] - p[0]));
    let g = [0, 1, 2].map(|a| {
        let (q, r) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        Vector2::new(q.y - r.y, r.x - q.x) / (2.0 * area)
    });
    (g, area)
}

/// 6×6 element matrix in local order `(0x, 0y, 1x, 1y, 2x, 2y)`.
pub fn element_matrix(p: [nalgebra::Point2<f64>; 3], lame: LameParams, form: BilinearForm) -> DMatrix<f64> {
    let (g, area) = hat_gradients(p);
    let (mu, lambda) = (lame.mu, lame.lambda);
    DMatrix::from_fn(6, 6, |r, c| {
        let (a, i, b, j) = (r / 2, r % 2, c / 2, c % 2);
        let delta = if i == j { g[a].dot(&g[b]) } else { 0.0 };
        area * match form {
            BilinearForm::Strain => mu * (delta + g[a][j] * g[b][i]) + lambda * g[a][i] * g[b][j],
            BilinearForm::GradDiv => mu * delta + (lambda + mu) * g[a][i] * g[b][j],
        }
    })
}

/// Symmetric `2n × 2n` stiffness matrix in system order, with `k` boundary
/// nodes first.
#[derive(Clone, Debug)]
pub struct StiffnessMatrix {
    a: CscMatrix<f64>,
    k: usize,
    n: usize,
}

impl StiffnessMatrix {
    /// Wraps an assembled matrix whose first `2k` rows belong to the
    /// boundary.
    pub fn from_dense(a: &DMatrix<f64>, k: usize) -> Result<Self, ElasticityError> {
        if a.nrows() != a.ncols() || a.nrows() % 2 != 0 || 2 * k > a.nrows() {
            return Err(ElasticityError::DimensionMismatch {
                expected: 2 * k,
                got: a.nrows(),
            });
        }
        Ok(Self {
            a: CscMatrix::from(a),
            k,
            n: a.nrows() / 2,
        })
    }

    pub fn matrix(&self) -> &CscMatrix<f64> {
        &self.a
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from(&self.a)
    }

    pub fn num_boundary(&self) -> usize {
        self.k
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.a * v
    }

    /// Rows `rows` and columns `cols` (DOF ranges) as a sparse matrix.
    fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CscMatrix<f64> {
        let mut coo = CooMatrix::new(rows.len(), cols.len());
        for (i, j, &v) in self.a.triplet_iter() {
            if rows.contains(&i) && cols.contains(&j) {
                coo.push(i - rows.start, j - cols.start, v);
            }
        }
        CscMatrix::from(&coo)
    }

    fn split(&self) -> usize {
        2 * self.k
    }

    pub fn a_bb(&self) -> DMatrix<f64> {
        DMatrix::from(&self.block(0..self.split(), 0..self.split()))
    }

    pub fn a_ib(&self) -> CscMatrix<f64> {
        self.block(self.split()..2 * self.n, 0..self.split())
    }

    pub fn a_ii(&self) -> CscMatrix<f64> {
        self.block(self.split()..2 * self.n, self.split()..2 * self.n)
    }

    fn factor_interior(&self) -> Result<CscCholesky<f64>, ElasticityError> {
        CscCholesky::factor(&self.a_ii()).map_err(|_| ElasticityError::SingularInterior)
    }
}

pub fn assemble_stiffness(m: &TriMesh, ord: &NodeOrdering, lame: LameParams) -> Result<StiffnessMatrix, ElasticityError> {
    assemble_stiffness_with(m, ord, lame, BilinearForm::default())
}

pub fn assemble_stiffness_with(
    m: &TriMesh,
    ord: &NodeOrdering,
    lame: LameParams,
    form: BilinearForm,
) -> Result<StiffnessMatrix, ElasticityError> {
    let lame = LameParams::new(lame.mu, lame.lambda)?;
    if ord.n != m.nodes.len() {
        return Err(ElasticityError::DimensionMismatch {
            expected: m.nodes.len(),
            got: ord.n,
        });
    }
    let diag = m.bbox().map_or(0.0, |b| b.diagonal());
    let min_area = 1e-14 * diag * diag;
    let dofs = 2 * ord.n;
    let mut coo = CooMatrix::new(dofs, dofs);
    for (t, tri) in m.triangles.iter().enumerate() {
        let p = tri.map(|v| m.nodes[v]);
        if 0.5 * (p[1] - p[0]).perp(&(p[2] - p[0])) < min_area {
            return Err(ElasticityError::DegenerateTriangle { index: t });
        }
        let ke = element_matrix(p, lame, form);
        let global = |r: usize| 2 * ord.to_system[tri[r / 2]] + r % 2;
        for r in 0..6 {
            for c in 0..6 {
                coo.push(global(r), global(c), ke[(r, c)]);
            }
        }
    }
    Ok(StiffnessMatrix {
        a: CscMatrix::from(&coo),
        k: ord.k,
        n: ord.n,
    })
}

/// Condensed boundary operator `S = A_BB − A_BI A_II⁻¹ A_IB` together with
/// the dense interior recovery map `R = −A_II⁻¹ A_IB`.
#[derive(Clone, Debug)]
pub struct SchurOperator {
    s: DMatrix<f64>,
    recovery: DMatrix<f64>,
}

impl SchurOperator {
    /// Wraps a precomputed operator, e.g. one read from a dump. Interior
    /// recovery is unavailable.
    pub fn from_matrix(s: DMatrix<f64>) -> Result<Self, ElasticityError> {
        if s.nrows() != s.ncols() || s.nrows() % 2 != 0 {
            return Err(ElasticityError::DimensionMismatch {
                expected: s.nrows(),
                got: s.ncols(),
            });
        }
        let k2 = s.nrows();
        Ok(Self {
            s,
            recovery: DMatrix::zeros(0, k2),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn num_boundary(&self) -> usize {
        self.s.nrows() / 2
    }

    /// The two rows `S_i` belonging to boundary node `i`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        self.s.rows(2 * i, 2).into_owned()
    }

    pub fn apply(&self, u_b: &DVector<f64>) -> DVector<f64> {
        &self.s * u_b
    }

    /// Dense `2(N−K) × 2K` map from boundary to interior displacements.
    pub fn recovery_map(&self) -> &DMatrix<f64> {
        &self.recovery
    }

    pub fn interior(&self, u_b: &DVector<f64>) -> DVector<f64> {
        &self.recovery * u_b
    }
}

pub fn schur_condense(a: &StiffnessMatrix) -> Result<SchurOperator, ElasticityError> {
    let a_bb = a.a_bb();
    if a.n == a.k {
        return Ok(SchurOperator {
            s: a_bb,
            recovery: DMatrix::zeros(0, 2 * a.k),
        });
    }
    let chol = a.factor_interior()?;
    let a_ib = DMatrix::from(&a.a_ib());
    let x = chol.solve(&a_ib);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ElasticityError::SingularInterior);
    }
    let mut s = a_bb - a_ib.transpose() * &x;
    // Remove the rounding asymmetry so S is exactly symmetric.
    let st = s.transpose();
    s = (s + st) * 0.5;
    Ok(SchurOperator { s, recovery: -x })
}

/// Interior displacements with zero interior force: `A_II u_I = −A_IB u_B`.
pub fn recover_interior(a: &StiffnessMatrix, u_b: &DVector<f64>) -> Result<DVector<f64>, ElasticityError> {
    if u_b.len() != 2 * a.k {
        return Err(ElasticityError::DimensionMismatch {
            expected: 2 * a.k,
            got: u_b.len(),
        });
    }
    if a.n == a.k {
        return Ok(DVector::zeros(0));
    }
    let rhs = -(&a.a_ib() * u_b);
    let sol = a.factor_interior()?.solve(&rhs);
    Ok(sol.column(0).into_owned())
}

/// Per-node boundary forces `f_i = S_i u_B`.
pub fn boundary_forces(s: &SchurOperator, u_b: &DVector<f64>) -> Result<Vec<Vector2<f64>>, ElasticityError> {
    if u_b.len() != s.s.nrows() {
        return Err(ElasticityError::DimensionMismatch {
            expected: s.s.nrows(),
            got: u_b.len(),
        });
    }
    let f = s.apply(u_b);
    Ok((0..s.num_boundary()).map(|i| Vector2::new(f[2 * i], f[2 * i + 1])).collect())
}

/// Sum of the per-node force norms.
pub fn total_force_norm(forces: &[Vector2<f64>]) -> f64 {
    forces.iter().map(|f| f.norm()).sum()
}

/// Interleaved displacement of `nodes` under the affine field `x ↦ M x + t`.
pub fn affine_field(nodes: &[nalgebra::Point2<f64>], m: Matrix2<f64>, t: Vector2<f64>) -> DVector<f64> {
    DVector::from_iterator(2 * nodes.len(), nodes.iter().flat_map(|p| {
        let u = m * p.coords + t;
        [u.x, u.y]
    }))
}
