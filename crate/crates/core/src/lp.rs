//! Dense bounded-variable primal simplex.
//!
//! Variables carry finite lower bounds and optional upper bounds; nonbasic
//! variables sit at either bound. Phase one minimizes the sum of artificial
//! variables, phase two the objective. Pricing is Dantzig's rule until a run
//! of degenerate pivots is seen, after which Bland's smallest-index rule is
//! used until the objective moves again, so the method cannot cycle.
//!
//! [`LinearProgram::minimize_lexicographic`] optimizes several objectives
//! in priority order: after each stage every nonbasic variable with a
//! non-zero reduced cost is frozen at its bound, which restricts the next
//! stage to the optimal face of the previous one.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("variable {0} has an infinite or inconsistent bound")]
    InvalidBounds(usize),
    #[error("objective has {got} coefficients, expected {expected}")]
    ObjectiveLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Value of each objective, in the order given.
    pub objectives: Vec<f64>,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 50;
const MAX_ITERATIONS: usize = 100_000;

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable with `lower <= x <= upper`; `upper` may be infinite.
    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.lower.len() - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row { terms, relation, rhs });
    }

    pub fn minimize(&self, objective: &[f64]) -> Result<LpSolution, LpError> {
        self.minimize_lexicographic(&[objective])
    }

    pub fn minimize_lexicographic(&self, objectives: &[&[f64]]) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        for obj in objectives {
            if obj.len() != n {
                return Err(LpError::ObjectiveLength { got: obj.len(), expected: n });
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !l.is_finite() || u.is_nan() || u < l - FEAS_TOL {
                return Err(LpError::InvalidBounds(j));
            }
        }

        let mut tab = Tableau::build(self);
        tab.phase_one()?;
        for obj in objectives {
            let mut cost = vec![0.0; tab.cols];
            cost[..n].copy_from_slice(obj);
            tab.set_cost(&cost);
            tab.iterate()?;
            tab.freeze_optimal_face();
        }

        let shifted = tab.values();
        let x: Vec<f64> = (0..n).map(|j| shifted[j] + self.lower[j]).collect();
        let objectives = objectives
            .iter()
            .map(|c| c.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        Ok(LpSolution { x, objectives, pivots: tab.pivots })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

/// `rows x cols` tableau `B^-1 A` over shifted variables `0 <= x <= upper`.
struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    /// Columns that may never enter the basis.
    frozen: Vec<bool>,
    artificial_start: usize,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let slack_count = lp.rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let artificial_start = n + slack_count;
        let cols = artificial_start + m;

        let mut a = vec![0.0; m * cols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![usize::MAX; m];
        let mut upper: Vec<f64> = (0..n).map(|j| lp.upper[j] - lp.lower[j]).collect();
        upper.extend(std::iter::repeat_n(f64::INFINITY, slack_count + m));
        let mut status = vec![Status::AtLower; cols];
        let mut frozen = vec![false; cols];

        let mut slack = n;
        for (i, row) in lp.rows.iter().enumerate() {
            let r = &mut a[i * cols..(i + 1) * cols];
            let mut rhs = row.rhs;
            for &(j, v) in &row.terms {
                r[j] += v;
                rhs -= v * lp.lower[j];
            }
            let slack_col = match row.relation {
                Relation::Le => {
                    r[slack] = 1.0;
                    slack += 1;
                    Some(slack - 1)
                }
                Relation::Ge => {
                    r[slack] = -1.0;
                    slack += 1;
                    Some(slack - 1)
                }
                Relation::Eq => None,
            };
            if rhs < 0.0 {
                r.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
            }
            beta[i] = rhs;
            match slack_col {
                Some(s) if r[s] > 0.0 => {
                    basis[i] = s;
                    status[s] = Status::Basic;
                    frozen[artificial_start + i] = true;
                    upper[artificial_start + i] = 0.0;
                }
                _ => {
                    let art = artificial_start + i;
                    r[art] = 1.0;
                    basis[i] = art;
                    status[art] = Status::Basic;
                }
            }
        }
        // Fixed-width variables never need to move.
        for j in 0..n {
            if upper[j] <= 0.0 {
                upper[j] = 0.0;
                frozen[j] = true;
            }
        }

        Self {
            rows: m,
            cols,
            a,
            beta,
            basis,
            status,
            upper,
            frozen,
            artificial_start,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            pivots: 0,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn set_cost(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.reduced.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.cols..(i + 1) * self.cols];
                self.reduced.iter_mut().zip(row).for_each(|(d, a)| *d -= cb * a);
            }
        }
    }

    fn objective(&self) -> f64 {
        self.values().iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    fn values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.cols)
            .map(|j| match self.status[j] {
                Status::AtUpper => self.upper[j],
                _ => 0.0,
            })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.beta[i];
        }
        x
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        let mut cost = vec![0.0; self.cols];
        for j in self.artificial_start..self.cols {
            if !self.frozen[j] {
                cost[j] = 1.0;
            }
        }
        self.set_cost(&cost);
        self.iterate()?;
        let scale = 1.0 + self.beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if self.objective() > FEAS_TOL * scale {
            return Err(LpError::Infeasible);
        }

        // Pivot remaining (zero-valued) artificials out where possible.
        for i in 0..self.rows {
            if self.basis[i] < self.artificial_start {
                continue;
            }
            let entering = (0..self.artificial_start)
                .filter(|&j| self.status[j] != Status::Basic && !self.frozen[j])
                .max_by(|&p, &q| self.at(i, p).abs().total_cmp(&self.at(i, q).abs()))
                .filter(|&j| self.at(i, j).abs() > PIVOT_TOL);
            if let Some(j) = entering {
                let value = if self.status[j] == Status::AtUpper { self.upper[j] } else { 0.0 };
                self.pivot(i, j, value, Status::AtLower);
            }
        }
        for j in self.artificial_start..self.cols {
            self.frozen[j] = true;
            self.upper[j] = 0.0;
        }
        Ok(())
    }

    /// Replaces `basis[r]` by column `j`, which takes `value`; the leaving
    /// variable becomes nonbasic with `leaving`.
    fn pivot(&mut self, r: usize, j: usize, value: f64, leaving: Status) {
        let cols = self.cols;
        let piv = self.at(r, j);
        {
            let row = &mut self.a[r * cols..(r + 1) * cols];
            row.iter_mut().for_each(|v| *v /= piv);
            row[j] = 1.0;
        }
        let (before, rest) = self.a.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for chunk in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = chunk[j];
            if f != 0.0 {
                chunk.iter_mut().zip(prow.iter()).for_each(|(v, p)| *v -= f * p);
                chunk[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            self.reduced.iter_mut().zip(prow.iter()).for_each(|(d, p)| *d -= f * p);
            self.reduced[j] = 0.0;
        }
        let old = self.basis[r];
        self.status[old] = leaving;
        self.status[j] = Status::Basic;
        self.basis[r] = j;
        self.beta[r] = value;
        self.pivots += 1;
    }

    fn eligible(&self, j: usize) -> bool {
        if self.frozen[j] {
            return false;
        }
        match self.status[j] {
            Status::AtLower => self.reduced[j] < -COST_TOL,
            Status::AtUpper => self.reduced[j] > COST_TOL,
            Status::Basic => false,
        }
    }

    fn iterate(&mut self) -> Result<(), LpError> {
        let mut degenerate_run = 0;
        for _ in 0..MAX_ITERATIONS {
            let bland = degenerate_run >= DEGENERATE_RUN;
            let entering = if bland {
                (0..self.cols).find(|&j| self.eligible(j))
            } else {
                (0..self.cols)
                    .filter(|&j| self.eligible(j))
                    .max_by(|&p, &q| self.reduced[p].abs().total_cmp(&self.reduced[q].abs()))
            };
            let Some(j) = entering else {
                return Ok(());
            };
            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };

            // Ratio test; ties go to the smallest basic index.
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, Status)> = None;
            for i in 0..self.rows {
                let alpha = dir * self.at(i, j);
                let (ratio, to) = if alpha > PIVOT_TOL {
                    (self.beta[i].max(0.0) / alpha, Status::AtLower)
                } else if alpha < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                    let room = (self.upper[self.basis[i]] - self.beta[i]).max(0.0);
                    (room / -alpha, Status::AtUpper)
                } else {
                    continue;
                };
                let better = match leave {
                    _ if ratio < theta - 1e-12 => true,
                    Some((r, _)) => ratio <= theta + 1e-12 && self.basis[i] < self.basis[r],
                    None => false,
                };
                if better {
                    theta = ratio;
                    leave = Some((i, to));
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded);
            }

            for i in 0..self.rows {
                let alpha = self.at(i, j);
                if alpha != 0.0 {
                    self.beta[i] -= dir * alpha * theta;
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                }
                Some((r, to)) => {
                    let value = if dir > 0.0 { theta } else { self.upper[j] - theta };
                    self.pivot(r, j, value, to);
                }
            }
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
        Err(LpError::IterationLimit)
    }

    fn freeze_optimal_face(&mut self) {
        for j in 0..self.cols {
            if self.status[j] != Status::Basic && self.reduced[j].abs() > COST_TOL {
                self.frozen[j] = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, f64::INFINITY);
        let y = lp.add_var(0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let sol = lp.minimize(&[-3.0, -5.0]).unwrap();
        assert!(close(sol.x[0], 2.0) && close(sol.x[1], 6.0));
        assert!(close(sol.objectives[0], -36.0));
    }

    #[test]
    fn bounds_replace_constraints() {
        // Same optimum with x <= 4 and y <= 6 as variable bounds.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 4.0);
        let y = lp.add_var(0.0, 6.0);
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let sol = lp.minimize(&[-3.0, -5.0]).unwrap();
        assert!(close(sol.x[0], 2.0) && close(sol.x[1], 6.0));
    }

    #[test]
    fn equality_and_ge_with_shifted_bounds() {
        // min x + 2y s.t. x + y = 10, x - y >= 2, 1 <= x <= 5, y >= 3
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 5.0);
        let y = lp.add_var(3.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 10.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Ge, 2.0);
        assert_eq!(lp.minimize(&[1.0, 2.0]), Err(LpError::Infeasible));

        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 8.0);
        let y = lp.add_var(3.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 10.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Ge, 2.0);
        let sol = lp.minimize(&[1.0, 2.0]).unwrap();
        assert!(close(sol.x[0], 7.0) && close(sol.x[1], 3.0), "{:?}", sol.x);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, f64::INFINITY);
        let y = lp.add_var(0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.minimize(&[-1.0, 0.0]), Err(LpError::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 10.0);
        let y = lp.add_var(0.0, 10.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 4.0);
        lp.add_constraint(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 8.0);
        let sol = lp.minimize(&[1.0, 3.0]).unwrap();
        assert!(close(sol.x[0], 4.0) && close(sol.x[1], 0.0));
    }

    #[test]
    fn lexicographic_tie_break() {
        // Every point on x + y = 2 costs the same under the first objective;
        // the second picks the one with the smallest y.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 2.0);
        let y = lp.add_var(0.0, 2.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Ge, 2.0);
        let sol = lp.minimize_lexicographic(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(close(sol.x[0], 2.0) && close(sol.x[1], 0.0));
        assert!(close(sol.objectives[0], 2.0));
        // Secondary must not trade away primary optimality.
        let sol = lp.minimize_lexicographic(&[&[1.0, 2.0], &[-1.0, 0.0]]).unwrap();
        assert!(close(sol.objectives[0], 2.0) && close(sol.x[0], 2.0));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under textbook Dantzig pricing.
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = (0..4).map(|_| lp.add_var(0.0, f64::INFINITY)).collect();
        lp.add_constraint(
            vec![(v[0], 0.25), (v[1], -60.0), (v[2], -0.04), (v[3], 9.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(
            vec![(v[0], 0.5), (v[1], -90.0), (v[2], -0.02), (v[3], 3.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(vec![(v[2], 1.0)], Relation::Le, 1.0);
        let sol = lp.minimize(&[-0.75, 150.0, -0.02, 6.0]).unwrap();
        assert!(close(sol.objectives[0], -0.05), "{}", sol.objectives[0]);
    }
}
