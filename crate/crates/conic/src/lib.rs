//! Second-order cone programming.
//!
//! Build a [`ConicProgram`] with the epigraph helpers, then [`solve`] it with
//! the built-in interior-point method:
//!
//! ```
//! use conic::{ConicProgram, LinearMap, SolverSettings, SolveStatus};
//!
//! // minimize t  s.t. ‖(3, 4)‖ ≤ t
//! let mut p = ConicProgram::new(1);
//! p.set_cost(0, 1.0).unwrap();
//! p.add_norm_epigraph(&LinearMap::new(vec![vec![], vec![]]), &[3.0, 4.0], 0).unwrap();
//! let sol = conic::solve(&p, &SolverSettings::default()).unwrap();
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert!((sol.objective - 5.0).abs() < 1e-7);
//! ```

mod cone;
mod presolve;
mod program;
mod solver;

pub use program::{AffineExpr, ConeConstraint, ConeKind, ConicProgram, Equality, LinearMap};
pub use solver::{solve, ConicSolution, IterationInfo, SolveStatus, SolverSettings};

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure after {} iterations: {message}", trace.len())]
    NumericalFailure {
        message: String,
        trace: Vec<IterationInfo>,
    },
}
