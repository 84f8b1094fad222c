//! Transmission switching under uncertain line outages.
//!
//! The crate is organized around six building blocks:
//!
//! - [`net`] — grid data model, MATPOWER-subset and JSON case parsing,
//!   load scaling, default cost construction and the disjunctive big-M
//!   angle bound.
//! - [`scenario`] — per-line outage risk ingestion and Monte Carlo
//!   generation of outage scenario sets with risk thresholding.
//! - [`milp`] — a solver-agnostic mixed-integer linear model (with
//!   diagonal-quadratic objective support) and a self-contained
//!   branch-and-bound reference backend over a bounded-variable simplex.
//! - [`formulation`] — translation of a network plus scenario set into
//!   deterministic, preventive (first-stage switching) and corrective
//!   (recourse switching) optimization models, extensive forms, and
//!   per-scenario regularized subproblems; solution extraction and an
//!   independent physics verifier.
//! - [`ph`] — the progressive hedging engine: scenario decomposition,
//!   aggregation, multiplier and adaptive penalty updates, primal/dual
//!   gap termination, serial and parallel execution.
//! - [`harness`] — experiment runner (scenario-count sweeps, load
//!   scalings, preventive-vs-corrective comparisons, risk-threshold
//!   confidence study) with CSV and SVG emission.

pub mod formulation;
pub mod harness;
pub mod milp;
pub mod net;
pub mod ph;
pub mod scenario;


pub use milp::{Model, Solution, SolveConfig, SolveStatus};



