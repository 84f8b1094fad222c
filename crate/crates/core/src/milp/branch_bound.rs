//! Best-bound branch and bound over LP relaxations.
//!
//! Branching variable: most fractional, ties broken by lowest index. Node
//! selection: best bound, ties broken by node id, so the search order is
//! fully deterministic. Diagonal quadratic objective terms are modeled by
//! an epigraph variable per quadratic column, bounded below by tangent
//! lines of the parabola; tangents start on a uniform grid over the
//! variable's bounds and are refined at candidate optima until the
//! surrogate matches the true quadratic there.

use super::model::{
    ConstraintSense, Model, Solution, SolveConfig, SolveError, SolveStats, SolveStatus,
};
use super::simplex::{LpResult, LpStatus, StandardLp};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

/// Continuous relaxation: identical model with integrality flags dropped.
pub fn lp_relaxation(model: &Model) -> Model {
    let mut relaxed = model.clone();
    relaxed.clear_integrality();
    relaxed
}

/// Reference mixed-integer backend. Stateless; safe to share across
/// threads and to call concurrently on distinct models.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchBoundBackend;

impl BranchBoundBackend {
    pub fn solve(&self, model: &Model, config: &SolveConfig) -> Result<Solution, SolveError> {
        model.validate()?;
        let start = Instant::now();
        let mut worker = Worker::new(model, config);
        let mut solution = worker.run()?;
        solution.stats.wall = start.elapsed();
        Ok(solution)
    }
}

/// Convenience wrapper over the reference backend with default settings.
pub fn solve(model: &Model, config: &SolveConfig) -> Result<Solution, SolveError> {
    BranchBoundBackend.solve(model, config)
}

struct QuadTerm {
    var: usize,
    /// Epigraph column index in the working LP.
    epi: usize,
    coeff: f64,
    /// Points where tangent cuts of `coeff * x^2` have been added.
    tangents: Vec<f64>,
}

impl QuadTerm {
    /// Piecewise-linear surrogate value at `x`: the max over tangent lines.
    /// Computed directly from the tangent points so LP tolerance noise on
    /// the epigraph column cannot mask the true approximation gap.
    fn surrogate(&self, x: f64) -> f64 {
        self.tangents
            .iter()
            .map(|&x0| self.coeff * x0 * (2.0 * x - x0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Node {
    /// Tightened bounds for integer variables only: (var, lower, upper).
    tightenings: Vec<(usize, f64, f64)>,
}

struct HeapEntry {
    bound: f64,
    id: u64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // BinaryHeap is a max-heap; invert so the smallest bound pops first,
    // oldest node id on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Worker<'a> {
    model: &'a Model,
    config: &'a SolveConfig,
    lp: StandardLp,
    quads: Vec<QuadTerm>,
    integers: Vec<usize>,
    lp_iterations: u64,
    nodes: u64,
}

impl<'a> Worker<'a> {
    fn new(model: &'a Model, config: &'a SolveConfig) -> Self {
        let mut lp = StandardLp::from_model(model);
        let mut quads = Vec::new();
        for (j, &q) in model.obj_quadratic().iter().enumerate() {
            if q > 0.0 {
                let (l, u) = lp.bounds(j);
                let (epi, tangents) = add_epigraph(&mut lp, j, q, l, u, config.quad_segments);
                quads.push(QuadTerm {
                    var: j,
                    epi,
                    coeff: q,
                    tangents,
                });
            }
        }
        let integers = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(j, _)| j)
            .collect();
        Worker {
            model,
            config,
            lp,
            quads,
            integers,
            lp_iterations: 0,
            nodes: 0,
        }
    }

    fn run(&mut self) -> Result<Solution, SolveError> {
        let constant = self.model.obj_constant();
        let root = self.solve_node(&[])?;
        self.nodes += 1;
        match root.status {
            LpStatus::Infeasible => return Ok(self.finish(SolveStatus::Infeasible, None)),
            LpStatus::Unbounded => return Ok(self.finish(SolveStatus::Unbounded, None)),
            LpStatus::IterationLimit => return Ok(self.finish(SolveStatus::IterationLimit, None)),
            LpStatus::Optimal => {}
        }

        let mut nodes: Vec<Node> = vec![Node {
            tightenings: Vec::new(),
        }];
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            bound: root.objective + constant,
            id: 0,
            index: 0,
        });
        let mut next_id = 1u64;
        let mut incumbent: Option<(f64, Vec<f64>)> = None;

        while let Some(entry) = heap.pop() {
            if let Some((best, _)) = &incumbent {
                // Best-bound order: once the frontier is within the gap the
                // incumbent is proven.
                if entry.bound >= best - gap_slack(*best, self.config.mip_gap) {
                    break;
                }
            }
            if self.nodes >= self.config.max_nodes {
                return Ok(self.finish(SolveStatus::IterationLimit, incumbent));
            }

            let tightenings = nodes[entry.index].tightenings.clone();
            let result = self.solve_node(&tightenings)?;
            self.nodes += 1;
            match result.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    return Err(SolveError::Numerical(
                        "node relaxation unbounded below a bounded root".into(),
                    ))
                }
                LpStatus::IterationLimit => {
                    return Ok(self.finish(SolveStatus::IterationLimit, incumbent))
                }
                LpStatus::Optimal => {}
            }
            let node_obj = result.objective + constant;
            if let Some((best, _)) = &incumbent {
                if node_obj >= best - gap_slack(*best, self.config.mip_gap) {
                    continue;
                }
            }

            match self.most_fractional(&result.values) {
                None => {
                    // Integer feasible: fix the integers and polish.
                    if let Some((obj, values)) = self.polish(&result, &tightenings)? {
                        let better = incumbent
                            .as_ref()
                            .map_or(true, |(best, _)| obj < *best - 1e-12);
                        if better {
                            incumbent = Some((obj, values));
                        }
                    }
                }
                Some(j) => {
                    let x = result.values[j];
                    let (lo, hi) = effective_bounds(&self.lp, &tightenings, j);
                    let mut down = tightenings.clone();
                    down.push((j, lo, x.floor()));
                    let mut up = tightenings;
                    up.push((j, x.ceil(), hi));
                    for t in [down, up] {
                        let index = nodes.len();
                        nodes.push(Node { tightenings: t });
                        heap.push(HeapEntry {
                            bound: node_obj,
                            id: next_id,
                            index,
                        });
                        next_id += 1;
                    }
                }
            }
        }

        if incumbent.is_some() {
            Ok(self.finish(SolveStatus::Optimal, incumbent))
        } else {
            Ok(self.finish(SolveStatus::Infeasible, None))
        }
    }

    /// Solves the LP under `tightenings`, restoring base bounds afterwards.
    fn solve_node(&mut self, tightenings: &[(usize, f64, f64)]) -> Result<LpResult, SolveError> {
        let saved: Vec<(usize, f64, f64)> = tightenings
            .iter()
            .map(|&(j, _, _)| {
                let (l, u) = self.lp.bounds(j);
                (j, l, u)
            })
            .collect();
        for &(j, l, u) in tightenings {
            if l > u {
                for &(j, l, u) in &saved {
                    self.lp.set_bounds(j, l, u);
                }
                return Ok(LpResult {
                    status: LpStatus::Infeasible,
                    values: Vec::new(),
                    objective: f64::INFINITY,
                    iterations: 0,
                });
            }
            self.lp.set_bounds(j, l, u);
        }
        let budget = self
            .config
            .max_lp_iterations
            .saturating_sub(self.lp_iterations)
            .max(1);
        let result = self.lp.solve(budget);
        for &(j, l, u) in &saved {
            self.lp.set_bounds(j, l, u);
        }
        let result = result?;
        self.lp_iterations += result.iterations;
        Ok(result)
    }

    fn most_fractional(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.integers {
            let x = values[j];
            let frac = (x - x.round()).abs();
            if frac <= self.config.int_tol {
                continue;
            }
            let score = (x - x.floor()).min(x.ceil() - x);
            match best {
                Some((_, s)) if s >= score => {}
                _ => best = Some((j, score)),
            }
        }
        best.map(|(j, _)| j)
    }

    /// Fixes integer variables at their rounded values, re-solves the
    /// continuous part, and refines quadratic tangents until the epigraph
    /// is tight at the solution. Returns the exact objective.
    fn polish(
        &mut self,
        candidate: &LpResult,
        tightenings: &[(usize, f64, f64)],
    ) -> Result<Option<(f64, Vec<f64>)>, SolveError> {
        if self.integers.is_empty() && self.quads.is_empty() {
            let values: Vec<f64> = candidate.values[..self.model.num_vars()].to_vec();
            let obj = self.model.objective_value(&values);
            return Ok(Some((obj, values)));
        }
        let mut fixings = tightenings.to_vec();
        for &j in &self.integers {
            let v = candidate.values[j].round();
            fixings.push((j, v, v));
        }
        let mut last = self.solve_node(&fixings)?;
        if last.status != LpStatus::Optimal {
            // Rounding within tolerance made the node infeasible; treat the
            // candidate as unusable and keep searching.
            return Ok(None);
        }
        if !self.quads.is_empty() {
            let mut prev: Vec<f64> = self.quads.iter().map(|q| last.values[q.var]).collect();
            for _ in 0..80 {
                let mut cut_added = false;
                for q in &mut self.quads {
                    let x = last.values[q.var];
                    let gap = q.coeff * x * x - q.surrogate(x);
                    if gap > (q.coeff * 1e-14).max(1e-16) {
                        // Tangent of c*x^2 at x0: y >= 2*c*x0*x - c*x0^2.
                        self.lp.add_row(
                            &[(q.epi, 1.0), (q.var, -2.0 * q.coeff * x)],
                            ConstraintSense::Ge,
                            -q.coeff * x * x,
                        );
                        q.tangents.push(x);
                        cut_added = true;
                    }
                }
                if !cut_added {
                    break;
                }
                last = self.solve_node(&fixings)?;
                if last.status != LpStatus::Optimal {
                    return Ok(None);
                }
                let movement = self
                    .quads
                    .iter()
                    .zip(&prev)
                    .map(|(q, &p)| (last.values[q.var] - p).abs())
                    .fold(0.0f64, f64::max);
                for (slot, q) in prev.iter_mut().zip(&self.quads) {
                    *slot = last.values[q.var];
                }
                if movement <= self.config.quad_tol {
                    break;
                }
            }
        }
        let values: Vec<f64> = last.values[..self.model.num_vars()].to_vec();
        let obj = self.model.objective_value(&values);
        Ok(Some((obj, values)))
    }

    fn finish(&self, status: SolveStatus, incumbent: Option<(f64, Vec<f64>)>) -> Solution {
        match incumbent {
            Some((obj, values)) => Solution {
                status,
                values,
                objective: obj,
                stats: SolveStats {
                    nodes: self.nodes,
                    lp_iterations: self.lp_iterations,
                    wall: Default::default(),
                },
            },
            None => Solution {
                status,
                values: Vec::new(),
                objective: f64::NAN,
                stats: SolveStats {
                    nodes: self.nodes,
                    lp_iterations: self.lp_iterations,
                    wall: Default::default(),
                },
            },
        }
    }
}

fn gap_slack(incumbent: f64, rel_gap: f64) -> f64 {
    rel_gap * incumbent.abs().max(1.0)
}

fn effective_bounds(lp: &StandardLp, tightenings: &[(usize, f64, f64)], j: usize) -> (f64, f64) {
    let mut b = lp.bounds(j);
    for &(k, l, u) in tightenings {
        if k == j {
            b = (l, u);
        }
    }
    b
}

/// Adds the epigraph variable and initial tangent grid for `coeff * x^2`.
fn add_epigraph(
    lp: &mut StandardLp,
    var: usize,
    coeff: f64,
    lower: f64,
    upper: f64,
    segments: usize,
) -> (usize, Vec<f64>) {
    let epi = lp.add_column(f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let points = segments.max(2);
    let mut tangents = Vec::with_capacity(points);
    for k in 0..points {
        let x0 = lower + (upper - lower) * (k as f64) / ((points - 1) as f64);
        lp.add_row(
            &[(epi, 1.0), (var, -2.0 * coeff * x0)],
            ConstraintSense::Ge,
            -coeff * x0 * x0,
        );
        tangents.push(x0);
    }
    (epi, tangents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::Model;

    fn solve_default(m: &Model) -> Solution {
        solve(m, &SolveConfig::default()).unwrap()
    }

    #[test]
    fn trivial_continuous() {
        let mut m = Model::new("t");
        let x = m.add_var("x", 0.0, 10.0);
        m.add_obj(x, 1.0);
        m.add_constraint("floor", vec![(x, 1.0)], ConstraintSense::Ge, 3.0);
        let s = solve_default(&m);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn binary_packing() {
        // min -(3 y1 + 5 y2) s.t. y1 + y2 <= 1 => pick y2.
        let mut m = Model::new("t");
        let y1 = m.add_binary("y1");
        let y2 = m.add_binary("y2");
        m.add_obj(y1, -3.0);
        m.add_obj(y2, -5.0);
        m.add_constraint("pack", vec![(y1, 1.0), (y2, 1.0)], ConstraintSense::Le, 1.0);
        let s = solve_default(&m);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 5.0).abs() < 1e-9);
        assert!((s.value(y2) - 1.0).abs() < 1e-6);
        assert!(s.value(y1).abs() < 1e-6);
    }

    #[test]
    fn infeasible_model() {
        let mut m = Model::new("t");
        let x = m.add_var("x", 0.0, 10.0);
        m.add_constraint("ge", vec![(x, 1.0)], ConstraintSense::Ge, 3.0);
        m.add_constraint("le", vec![(x, 1.0)], ConstraintSense::Le, 2.0);
        assert_eq!(solve_default(&m).status, SolveStatus::Infeasible);
    }

    #[test]
    fn relaxation_drops_integrality() {
        let mut m = Model::new("t");
        let z = m.add_binary("z");
        m.add_obj(z, 1.0);
        let r = lp_relaxation(&m);
        assert!(!r.has_integers());
        assert_eq!(r.var(z).lower, 0.0);
        assert_eq!(r.var(z).upper, 1.0);
    }

    #[test]
    fn quadratic_clamp() {
        // min (x - a)^2 over [l, u] lands on clamp(a, l, u).
        for (a, l, u, expect) in [
            (0.37, 0.0, 1.0, 0.37),
            (-2.0, 0.0, 1.0, 0.0),
            (5.0, 0.0, 1.0, 1.0),
            (2.25, 1.0, 4.0, 2.25),
        ] {
            let mut m = Model::new("quad");
            let x = m.add_var("x", l, u);
            // (x - a)^2 = x^2 - 2 a x + a^2
            m.add_obj_quadratic(x, 1.0);
            m.add_obj(x, -2.0 * a);
            m.add_obj_constant(a * a);
            let s = solve_default(&m);
            assert_eq!(s.status, SolveStatus::Optimal);
            assert!(
                (s.value(x) - expect).abs() < 1e-6,
                "a={a}: got {} want {expect}",
                s.value(x)
            );
        }
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 8 x1 + 5 x2 + 4 x3 s.t. 6 x1 + 4 x2 + 3 x3 <= 12, binary.
        let mut m = Model::new("knap");
        let xs: Vec<_> = (0..3).map(|i| m.add_binary(format!("x{i}"))).collect();
        for (x, c) in xs.iter().zip([-8.0, -5.0, -4.0]) {
            m.add_obj(*x, c);
        }
        m.add_constraint(
            "cap",
            xs.iter().zip([6.0, 4.0, 3.0]).map(|(&x, w)| (x, w)).collect(),
            ConstraintSense::Le,
            12.0,
        );
        let s = solve_default(&m);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 13.0).abs() < 1e-9);
    }
}
