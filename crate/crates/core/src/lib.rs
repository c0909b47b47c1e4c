//! Elastic shape matching.
//!
//! A source polygon is deformed onto a target polygon by minimizing the
//! elastic boundary forces of a linear finite-element model plus the area of
//! the symmetric difference between the deformed source and the target. Each
//! outer iteration linearizes the area term and solves a second-order cone
//! program over the boundary displacements.

pub mod elasticity;
pub mod geometry;
pub mod matcher;
pub mod meshing;
pub mod shapes;
pub mod symdiff;
