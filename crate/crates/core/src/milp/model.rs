use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

/// Handle to a variable inside one [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse row; variable ids must be declared before use.
    pub terms: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

/// Minimization model with linear constraints and a linear plus diagonal
/// quadratic objective: `min c'x + sum_j q_j x_j^2 + constant`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Model {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    obj_linear: Vec<f64>,
    obj_quadratic: Vec<f64>,
    obj_constant: f64,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("variable {0} has lower bound {1} above upper bound {2}")]
    BoundOrder(String, f64, f64),
    #[error("constraint {0} references undeclared variable id {1}")]
    UnknownVariable(String, usize),
    #[error("quadratic coefficient for {0} is negative ({1}); objective must stay convex")]
    NegativeQuadratic(String, f64),
    #[error("quadratic term on {0} requires finite bounds, got [{1}, {2}]")]
    UnboundedQuadratic(String, f64, f64),
    #[error("value vector has {0} entries, model has {1} variables")]
    ValueDimension(usize, usize),
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Model {
            name: name.into(),
            ..Model::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer: false,
        });
        self.obj_linear.push(0.0);
        self.obj_quadratic.push(0.0);
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        let id = self.add_var(name, 0.0, 1.0);
        self.variables[id.0].integer = true;
        id
    }

    /// Adds to the linear objective coefficient of `var`.
    pub fn add_obj(&mut self, var: VarId, coeff: f64) {
        self.obj_linear[var.0] += coeff;
    }

    /// Adds to the diagonal quadratic objective coefficient of `var`.
    pub fn add_obj_quadratic(&mut self, var: VarId, coeff: f64) {
        self.obj_quadratic[var.0] += coeff;
    }

    pub fn add_obj_constant(&mut self, value: f64) {
        self.obj_constant += value;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.variables[var.0].lower = lower;
        self.variables[var.0].upper = upper;
    }

    pub fn clear_integrality(&mut self) {
        for v in &mut self.variables {
            v.integer = false;
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn obj_linear(&self) -> &[f64] {
        &self.obj_linear
    }

    pub fn obj_quadratic(&self) -> &[f64] {
        &self.obj_quadratic
    }

    pub fn obj_constant(&self) -> f64 {
        self.obj_constant
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.integer)
    }

    pub fn has_quadratic(&self) -> bool {
        self.obj_quadratic.iter().any(|&q| q != 0.0)
    }

    /// Objective value of a point, including quadratic terms and constant.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        let mut obj = self.obj_constant;
        for (j, &x) in values.iter().enumerate() {
            obj += self.obj_linear[j] * x + self.obj_quadratic[j] * x * x;
        }
        obj
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for v in &self.variables {
            if v.lower > v.upper {
                return Err(ModelError::BoundOrder(v.name.clone(), v.lower, v.upper));
            }
        }
        for c in &self.constraints {
            for &(VarId(j), _) in &c.terms {
                if j >= self.variables.len() {
                    return Err(ModelError::UnknownVariable(c.name.clone(), j));
                }
            }
        }
        for (j, &q) in self.obj_quadratic.iter().enumerate() {
            let v = &self.variables[j];
            if q < 0.0 {
                return Err(ModelError::NegativeQuadratic(v.name.clone(), q));
            }
            if q > 0.0 && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(ModelError::UnboundedQuadratic(
                    v.name.clone(),
                    v.lower,
                    v.upper,
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub lp_iterations: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// One value per model variable; empty unless status is Optimal or
    /// IterationLimit with an incumbent.
    pub values: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Backend settings. Defaults match the shipped reference backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Relative MIP gap at which branch and bound stops.
    pub mip_gap: f64,
    /// Absolute integrality tolerance.
    pub int_tol: f64,
    /// Absolute feasibility tolerance for the simplex.
    pub feas_tol: f64,
    /// Initial tangent count for each quadratic objective term.
    pub quad_segments: usize,
    /// Tangent refinement stops once no quadratic variable moves more than
    /// this between refinement rounds.
    pub quad_tol: f64,
    pub max_nodes: u64,
    pub max_lp_iterations: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            mip_gap: 1e-6,
            int_tol: 1e-6,
            feas_tol: 1e-9,
            quad_segments: 16,
            quad_tol: 1e-9,
            max_nodes: 5_000_000,
            max_lp_iterations: 50_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Max signed constraint violation of `values` over all rows and variable
/// bounds. Feasible points report a value `<= 0`; equality rows contribute
/// their absolute residual. Returns an error when `values` does not cover
/// every variable.
pub fn verify_solution(model: &Model, values: &[f64]) -> Result<f64, ModelError> {
    if values.len() != model.num_vars() {
        return Err(ModelError::ValueDimension(values.len(), model.num_vars()));
    }
    let mut worst = f64::NEG_INFINITY;
    for c in model.constraints() {
        let lhs: f64 = c.terms.iter().map(|&(VarId(j), a)| a * values[j]).sum();
        let violation = match c.sense {
            ConstraintSense::Le => lhs - c.rhs,
            ConstraintSense::Ge => c.rhs - lhs,
            ConstraintSense::Eq => (lhs - c.rhs).abs(),
        };
        worst = worst.max(violation);
    }
    for (j, v) in model.variables().iter().enumerate() {
        if v.lower.is_finite() {
            worst = worst.max(v.lower - values[j]);
        }
        if v.upper.is_finite() {
            worst = worst.max(values[j] - v.upper);
        }
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_order_rejected() {
        let mut m = Model::new("bad");
        m.add_var("x", 2.0, 1.0);
        assert!(matches!(m.validate(), Err(ModelError::BoundOrder(..))));
    }

    #[test]
    fn negative_quadratic_rejected() {
        let mut m = Model::new("bad");
        let x = m.add_var("x", 0.0, 1.0);
        m.add_obj_quadratic(x, -1.0);
        assert!(matches!(m.validate(), Err(ModelError::NegativeQuadratic(..))));
    }

    #[test]
    fn verify_reports_signed_violation() {
        let mut m = Model::new("v");
        let x = m.add_var("x", 0.0, 10.0);
        m.add_constraint("floor", vec![(x, 1.0)], ConstraintSense::Ge, 3.0);
        // x = 2 violates x >= 3 by exactly 1.
        assert_eq!(verify_solution(&m, &[2.0]).unwrap(), 1.0);
        // A feasible interior point has nonpositive worst violation.
        assert!(verify_solution(&m, &[5.0]).unwrap() <= 0.0);
    }

    #[test]
    fn verify_requires_full_vector() {
        let mut m = Model::new("v");
        m.add_var("x", 0.0, 1.0);
        m.add_var("y", 0.0, 1.0);
        assert!(verify_solution(&m, &[0.5]).is_err());
    }
}
