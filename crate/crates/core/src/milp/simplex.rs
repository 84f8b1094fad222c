//! Bounded-variable two-phase primal simplex with a dense explicit basis
//! inverse. Sized for desk-scale models (hundreds of rows); determinism
//! matters more than raw speed here, so pivoting rules break ties by lowest
//! column index and the basis is refactorized from scratch at fixed
//! intervals.

use super::model::{ConstraintSense, Model, SolveError, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Values for the structural (model) variables only.
    pub values: Vec<f64>,
    /// Linear objective over structural variables, without the constant.
    pub objective: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic variable parked at zero.
    FreeAtZero,
}

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const ZERO_TOL: f64 = 1e-12;
const REFACTOR_EVERY: u64 = 120;
const BLAND_AFTER: u32 = 60;

/// A linear program in computational form: structural columns with bounds
/// and costs plus one row per constraint. Extra tangent-cut rows can be
/// appended by the MIP layer before solving.
pub struct StandardLp {
    /// Sparse columns over the row space, structural variables only.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    senses: Vec<ConstraintSense>,
    rhs: Vec<f64>,
}

impl StandardLp {
    pub fn from_model(model: &Model) -> Self {
        let n = model.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut senses = Vec::with_capacity(model.num_constraints());
        let mut rhs = Vec::with_capacity(model.num_constraints());
        for (i, c) in model.constraints().iter().enumerate() {
            for &(VarId(j), a) in &c.terms {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            senses.push(c.sense);
            rhs.push(c.rhs);
        }
        StandardLp {
            cols,
            lower: model.variables().iter().map(|v| v.lower).collect(),
            upper: model.variables().iter().map(|v| v.upper).collect(),
            cost: model.obj_linear().to_vec(),
            senses,
            rhs,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_structural(&self) -> usize {
        self.cols.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    /// Appends a fresh structural column with no constraint entries yet;
    /// returns its index.
    pub fn add_column(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.cols.push(Vec::new());
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        self.cols.len() - 1
    }

    /// Appends a row `sum(terms) sense rhs`; returns its index.
    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: ConstraintSense, rhs: f64) -> usize {
        let i = self.rhs.len();
        for &(j, a) in terms {
            if a != 0.0 {
                self.cols[j].push((i, a));
            }
        }
        self.senses.push(sense);
        self.rhs.push(rhs);
        i
    }

    pub fn solve(&self, max_iterations: u64) -> Result<LpResult, SolveError> {
        Tableau::new(self).run(max_iterations)
    }
}

/// Working state of one solve. Columns are laid out as
/// `[structural | slack per row | artificials]`.
struct Tableau<'a> {
    lp: &'a StandardLp,
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    values: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Dense row-major basis inverse, m x m.
    binv: Vec<f64>,
    artificials: Vec<usize>,
    iterations: u64,
    since_refactor: u64,
    degenerate_run: u32,
    bland: bool,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a StandardLp) -> Self {
        let m = lp.num_rows();
        let n = lp.num_structural();
        let mut cols = lp.cols.clone();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut values = vec![0.0; n];
        let mut state = vec![VarState::FreeAtZero; n];

        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            if l.is_finite() && u.is_finite() {
                if l.abs() <= u.abs() {
                    state[j] = VarState::AtLower;
                    values[j] = l;
                } else {
                    state[j] = VarState::AtUpper;
                    values[j] = u;
                }
            } else if l.is_finite() {
                state[j] = VarState::AtLower;
                values[j] = l;
            } else if u.is_finite() {
                state[j] = VarState::AtUpper;
                values[j] = u;
            }
        }

        // Slack columns: row i becomes a'x + s_i = b_i.
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            let (l, u) = match lp.senses[i] {
                ConstraintSense::Le => (0.0, f64::INFINITY),
                ConstraintSense::Ge => (f64::NEG_INFINITY, 0.0),
                ConstraintSense::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
            values.push(0.0);
            state.push(VarState::AtLower);
        }

        let mut t = Tableau {
            lp,
            m,
            n,
            cols,
            lower,
            upper,
            values,
            state,
            basis: Vec::with_capacity(m),
            binv: vec![0.0; m * m],
            artificials: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        };
        t.install_start_basis();
        t
    }

    fn install_start_basis(&mut self) {
        let m = self.m;
        let mut residual = self.lp.rhs.clone();
        for j in 0..self.n {
            let x = self.values[j];
            if x != 0.0 {
                for &(i, a) in &self.cols[j] {
                    residual[i] -= a * x;
                }
            }
        }
        for i in 0..m {
            let slack = self.n + i;
            let (l, u) = (self.lower[slack], self.upper[slack]);
            let r = residual[i];
            if r >= l - FEAS_TOL && r <= u + FEAS_TOL {
                self.basis.push(slack);
                self.state[slack] = VarState::Basic;
                self.values[slack] = r;
                self.binv[i * m + i] = 1.0;
            } else {
                // Park the slack at its nearest bound and cover the gap
                // with a phase-1 artificial.
                let at = if r < l { l } else { u };
                self.values[slack] = at;
                self.state[slack] = if at == l {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                let gap = r - at;
                let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
                let art = self.cols.len();
                self.cols.push(vec![(i, sign)]);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.values.push(gap.abs());
                self.state.push(VarState::Basic);
                self.basis.push(art);
                self.artificials.push(art);
                self.binv[i * m + i] = sign;
            }
        }
    }

    fn run(mut self, max_iterations: u64) -> Result<LpResult, SolveError> {
        if !self.artificials.is_empty() {
            let mut phase1_cost = vec![0.0; self.cols.len()];
            for &a in &self.artificials {
                phase1_cost[a] = 1.0;
            }
            match self.iterate(&phase1_cost, max_iterations, true)? {
                LpStatus::IterationLimit => {
                    return Ok(self.result(LpStatus::IterationLimit));
                }
                _ => {
                    let infeas: f64 = self.artificials.iter().map(|&a| self.values[a]).sum();
                    if infeas > 1e-7 {
                        return Ok(self.result(LpStatus::Infeasible));
                    }
                    // Pin the artificials at zero for phase 2.
                    for &a in &self.artificials {
                        self.upper[a] = 0.0;
                        self.values[a] = 0.0;
                    }
                }
            }
        }

        let mut phase2_cost = vec![0.0; self.cols.len()];
        phase2_cost[..self.n].copy_from_slice(&self.lp.cost);
        let status = self.iterate(&phase2_cost, max_iterations, false)?;
        Ok(self.result(status))
    }

    fn result(&self, status: LpStatus) -> LpResult {
        let values: Vec<f64> = self.values[..self.n].to_vec();
        let objective = values
            .iter()
            .zip(&self.lp.cost)
            .map(|(x, c)| x * c)
            .sum();
        LpResult {
            status,
            values,
            objective,
            iterations: self.iterations,
        }
    }

    /// Runs pivots for one phase. Returns Optimal once no eligible entering
    /// column remains after a fresh refactorization.
    fn iterate(
        &mut self,
        cost: &[f64],
        max_iterations: u64,
        phase1: bool,
    ) -> Result<LpStatus, SolveError> {
        let mut verified_rounds = 0u32;
        loop {
            if self.iterations >= max_iterations {
                return Ok(LpStatus::IterationLimit);
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactorize()?;
            }
            let y = self.btran(cost);
            match self.price(cost, &y) {
                None => {
                    // Guard against drift: refresh the factorization and
                    // re-price before declaring optimality.
                    if verified_rounds >= 1 || self.since_refactor == 0 {
                        return Ok(LpStatus::Optimal);
                    }
                    self.refactorize()?;
                    verified_rounds += 1;
                    continue;
                }
                Some(entering) => {
                    verified_rounds = 0;
                    let d = cost[entering] - self.dot_col(&y, entering);
                    let dir = match self.state[entering] {
                        VarState::AtLower => 1.0,
                        VarState::AtUpper => -1.0,
                        VarState::FreeAtZero => {
                            if d < 0.0 {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                        VarState::Basic => unreachable!("basic column priced"),
                    };
                    match self.ratio_test(entering, dir)? {
                        Step::Unbounded => {
                            if phase1 {
                                return Err(SolveError::Numerical(
                                    "phase-1 objective unbounded below".into(),
                                ));
                            }
                            return Ok(LpStatus::Unbounded);
                        }
                        Step::BoundFlip(t) => self.apply_bound_flip(entering, dir, t),
                        Step::Pivot { row, t, w } => self.apply_pivot(entering, dir, t, row, &w),
                    }
                    self.iterations += 1;
                    self.since_refactor += 1;
                }
            }
        }
    }

    /// y = c_B' B^{-1}.
    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += cb * row[k];
                }
            }
        }
        y
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        self.cols[j].iter().map(|&(i, a)| y[i] * a).sum()
    }

    /// Entering-column selection: Dantzig most-negative pricing with a
    /// Bland fallback engaged after a run of degenerate pivots.
    fn price(&self, cost: &[f64], y: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols.len() {
            let eligible = match self.state[j] {
                VarState::Basic => continue,
                VarState::AtLower | VarState::AtUpper | VarState::FreeAtZero => {
                    // Fixed columns can never move.
                    self.lower[j] != self.upper[j] || self.state[j] == VarState::FreeAtZero
                }
            };
            if !eligible {
                continue;
            }
            let d = cost[j] - self.dot_col(y, j);
            let improving = match self.state[j] {
                VarState::AtLower => d < -OPT_TOL,
                VarState::AtUpper => d > OPT_TOL,
                VarState::FreeAtZero => d.abs() > OPT_TOL,
                VarState::Basic => false,
            };
            if !improving {
                continue;
            }
            if self.bland {
                return Some(j);
            }
            let score = d.abs();
            match best {
                Some((_, s)) if s >= score => {}
                _ => best = Some((j, score)),
            }
        }
        best.map(|(j, _)| j)
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for i in 0..m {
                w[i] += a * self.binv[i * m + r];
            }
        }
        w
    }

    fn ratio_test(&self, entering: usize, dir: f64) -> Result<Step, SolveError> {
        let w = self.ftran(entering);
        let mut t_best = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        let mut leave_pivot = 0.0f64;

        for (i, &wi) in w.iter().enumerate() {
            let delta = dir * wi;
            if delta.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let x = self.values[b];
            // Basic value moves by -t * delta.
            let limit = if delta > 0.0 {
                let l = self.lower[b];
                if l.is_finite() {
                    (x - l) / delta
                } else {
                    continue;
                }
            } else {
                let u = self.upper[b];
                if u.is_finite() {
                    (x - u) / delta
                } else {
                    continue;
                }
            };
            let limit = limit.max(0.0);
            let better = limit < t_best - ZERO_TOL
                || (limit < t_best + ZERO_TOL && {
                    if self.bland {
                        leaving.map_or(true, |p| b < self.basis[p])
                    } else {
                        delta.abs() > leave_pivot.abs()
                    }
                });
            if better {
                t_best = limit;
                leaving = Some(i);
                leave_pivot = delta;
            }
        }

        // The entering variable may hit its own opposite bound first.
        let own_span = self.upper[entering] - self.lower[entering];
        if own_span.is_finite() && own_span < t_best - ZERO_TOL {
            return Ok(Step::BoundFlip(own_span));
        }

        match leaving {
            None => {
                if own_span.is_finite() {
                    Ok(Step::BoundFlip(own_span))
                } else {
                    Ok(Step::Unbounded)
                }
            }
            Some(row) => Ok(Step::Pivot {
                row,
                t: t_best,
                w,
            }),
        }
    }

    fn apply_bound_flip(&mut self, entering: usize, dir: f64, t: f64) {
        for i in 0..self.m {
            let b = self.basis[i];
            let w_i = self.ftran_single(entering, i);
            self.values[b] -= dir * t * w_i;
        }
        self.values[entering] += dir * t;
        self.state[entering] = if dir > 0.0 {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        if t <= PIVOT_TOL {
            self.note_degenerate(true);
        } else {
            self.note_degenerate(false);
        }
    }

    /// Single entry of B^{-1} A_j; used by the (rare) bound-flip path.
    fn ftran_single(&self, j: usize, i: usize) -> f64 {
        self.cols[j]
            .iter()
            .map(|&(r, a)| a * self.binv[i * self.m + r])
            .sum()
    }

    fn apply_pivot(&mut self, entering: usize, dir: f64, t: f64, row: usize, w: &[f64]) {
        let m = self.m;
        let leaving = self.basis[row];

        for (i, &wi) in w.iter().enumerate() {
            let b = self.basis[i];
            self.values[b] -= dir * t * wi;
        }
        self.values[entering] += dir * t;

        // Snap the leaving variable onto the bound it reached.
        let delta = dir * w[row];
        if delta > 0.0 {
            self.values[leaving] = self.lower[leaving];
            self.state[leaving] = VarState::AtLower;
        } else {
            self.values[leaving] = self.upper[leaving];
            self.state[leaving] = VarState::AtUpper;
        }

        // Elementary update of the explicit inverse.
        let piv = w[row];
        let (head, tail) = self.binv.split_at_mut(row * m);
        let (prow, rest) = tail.split_at_mut(m);
        for x in prow.iter_mut() {
            *x /= piv;
        }
        for (i, chunk) in head.chunks_mut(m).enumerate() {
            let f = w[i];
            if f != 0.0 {
                for (x, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
            }
        }
        for (off, chunk) in rest.chunks_mut(m).enumerate() {
            let f = w[row + 1 + off];
            if f != 0.0 {
                for (x, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
            }
        }

        self.basis[row] = entering;
        self.state[entering] = VarState::Basic;
        self.note_degenerate(t <= PIVOT_TOL);
    }

    fn note_degenerate(&mut self, degenerate: bool) {
        if degenerate {
            self.degenerate_run += 1;
            if self.degenerate_run >= BLAND_AFTER {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    /// Rebuilds the dense inverse by Gauss-Jordan elimination with partial
    /// pivoting and recomputes basic values from scratch.
    fn refactorize(&mut self) -> Result<(), SolveError> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &col) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[col] {
                b[i * m + k] += a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = b[col * m + col].abs();
            for r in (col + 1)..m {
                let v = b[r * m + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-11 {
                return Err(SolveError::Numerical(format!(
                    "singular basis during refactorization (column {col})"
                )));
            }
            if piv_row != col {
                for k in 0..m {
                    b.swap(col * m + k, piv_row * m + k);
                    inv.swap(col * m + k, piv_row * m + k);
                }
            }
            let p = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = b[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;

        // Recompute basic values: x_B = B^{-1} (rhs - N x_N).
        let mut residual = self.lp.rhs.clone();
        for j in 0..self.cols.len() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let x = self.values[j];
            if x != 0.0 {
                for &(i, a) in &self.cols[j] {
                    residual[i] -= a * x;
                }
            }
        }
        for i in 0..m {
            let mut v = 0.0;
            let row = &self.binv[i * m..(i + 1) * m];
            for (k, &r) in residual.iter().enumerate() {
                v += row[k] * r;
            }
            self.values[self.basis[i]] = v;
        }
        self.since_refactor = 0;
        Ok(())
    }
}

enum Step {
    /// Entering variable travels to its opposite bound; basis unchanged.
    BoundFlip(f64),
    Pivot {
        row: usize,
        t: f64,
        w: Vec<f64>,
    },
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::{ConstraintSense, Model};

    fn lp(model: &Model) -> LpResult {
        StandardLp::from_model(model).solve(100_000).unwrap()
    }

    #[test]
    fn single_variable_floor() {
        let mut m = Model::new("t");
        let x = m.add_var("x", 0.0, 10.0);
        m.add_obj(x, 1.0);
        m.add_constraint("floor", vec![(x, 1.0)], ConstraintSense::Ge, 3.0);
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
        assert!((r.values[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_interval() {
        let mut m = Model::new("t");
        let x = m.add_var("x", 0.0, 10.0);
        m.add_constraint("ge", vec![(x, 1.0)], ConstraintSense::Ge, 3.0);
        m.add_constraint("le", vec![(x, 1.0)], ConstraintSense::Le, 2.0);
        assert_eq!(lp(&m).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let mut m = Model::new("t");
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        m.add_obj(x, 1.0);
        m.add_constraint("le", vec![(x, 1.0)], ConstraintSense::Le, 5.0);
        assert_eq!(lp(&m).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_negative_costs() {
        // min -x - 2y s.t. x + y = 4, x <= 3, y <= 3  => x=1, y=3.
        let mut m = Model::new("t");
        let x = m.add_var("x", 0.0, 3.0);
        let y = m.add_var("y", 0.0, 3.0);
        m.add_obj(x, -1.0);
        m.add_obj(y, -2.0);
        m.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], ConstraintSense::Eq, 4.0);
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 7.0).abs() < 1e-9);
        assert!((r.values[0] - 1.0).abs() < 1e-9);
        assert!((r.values[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn free_variable_equality() {
        // min |theta|-style problem: theta free, flow = -5 theta, flow = 2.
        let mut m = Model::new("t");
        let th = m.add_var("theta", f64::NEG_INFINITY, f64::INFINITY);
        let f = m.add_var("flow", -4.0, 4.0);
        m.add_obj(f, 1.0);
        m.add_constraint(
            "dc",
            vec![(f, 1.0), (th, 5.0)],
            ConstraintSense::Eq,
            0.0,
        );
        m.add_constraint("fix", vec![(f, 1.0)], ConstraintSense::Ge, 2.0);
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.values[1] - 2.0).abs() < 1e-9);
        assert!((r.values[0] + 0.4).abs() < 1e-9);
    }

    #[test]
    fn degenerate_transport() {
        // Transport with ties everywhere; exercises degenerate pivots.
        let mut m = Model::new("t");
        let mut vars = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                vars.push(m.add_var(format!("x{i}{j}"), 0.0, f64::INFINITY));
            }
        }
        let cost = [4.0, 2.0, 7.0, 2.0, 4.0, 7.0, 7.0, 7.0, 1.0];
        for (v, c) in vars.iter().zip(cost) {
            m.add_obj(*v, c);
        }
        for i in 0..3 {
            let terms: Vec<_> = (0..3).map(|j| (vars[3 * i + j], 1.0)).collect();
            m.add_constraint(format!("supply{i}"), terms, ConstraintSense::Eq, 1.0);
        }
        for j in 0..3 {
            let terms: Vec<_> = (0..3).map(|i| (vars[3 * i + j], 1.0)).collect();
            m.add_constraint(format!("demand{j}"), terms, ConstraintSense::Eq, 1.0);
        }
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 5.0).abs() < 1e-9, "got {}", r.objective);
    }
}
