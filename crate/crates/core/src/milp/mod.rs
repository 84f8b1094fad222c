//! Solver-agnostic optimization model and a reference mixed-integer backend.
//!
//! A [`Model`] holds bounded continuous/binary variables, sparse linear
//! constraints and a linear-plus-diagonal-quadratic objective (the quadratic
//! part carries proximal penalty terms; coefficients must be nonnegative so
//! the objective stays convex). The shipped backend solves LP relaxations
//! with a bounded-variable two-phase simplex and mixed-integer models by
//! best-bound branch and bound, branching on the most fractional variable.
//! Quadratic terms are handled by an epigraph of tangent cuts that is
//! refined until the piecewise-linear surrogate matches the quadratic at
//! the reported optimum.

mod branch_bound;
mod lp_writer;
mod model;
mod simplex;

pub use branch_bound::{lp_relaxation, solve, BranchBoundBackend};
pub use lp_writer::write_lp;
pub use model::{
    ConstraintSense, Model, ModelError, Solution, SolveConfig, SolveError, SolveStats,
    SolveStatus, VarId,
};
pub use model::verify_solution;
