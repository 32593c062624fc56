//! Dense two-phase primal simplex with Bland's rule pivot selection.
//!
//! Works on a canonical problem: minimize `c.x` subject to linear rows over
//! nonnegative variables (finite upper bounds arrive as explicit rows).
//! Desk-scale only: the tableau is a dense matrix and every pivot is
//! Bland's smallest-index choice, trading speed for guaranteed termination
//! and deterministic output.

use crate::model::ConstraintSense;

const EPS: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct LpRow {
    pub coeffs: Vec<f64>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub ncols: usize,
    pub rows: Vec<LpRow>,
    /// Minimized objective over the structural columns.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64> },
    Infeasible,
    Unbounded,
}

enum PivotResult {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // each row: coefficients then rhs in the last slot
    reduced: Vec<f64>,   // reduced costs; last slot holds -objective value
    basis: Vec<usize>,
    width: usize, // column count excluding the rhs slot
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        self.rows[row][self.width]
    }

    /// Rebuilds the reduced-cost row for the given cost vector against the
    /// current basis.
    fn price(&mut self, cost: &[f64]) {
        let mut reduced = vec![0.0; self.width + 1];
        reduced[..cost.len()].copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                let row = &self.rows[i];
                for j in 0..=self.width {
                    reduced[j] -= cb * row[j];
                }
            }
        }
        self.reduced = reduced;
    }

    fn pivot(&mut self, pivot_row: usize, pivot_col: usize) {
        let factor = self.rows[pivot_row][pivot_col];
        debug_assert!(factor.abs() > EPS);
        for v in self.rows[pivot_row].iter_mut() {
            *v /= factor;
        }
        for i in 0..self.rows.len() {
            if i == pivot_row {
                continue;
            }
            let mult = self.rows[i][pivot_col];
            if mult != 0.0 {
                for j in 0..=self.width {
                    let delta = mult * self.rows[pivot_row][j];
                    self.rows[i][j] -= delta;
                }
                self.rows[i][pivot_col] = 0.0;
            }
        }
        let mult = self.reduced[pivot_col];
        if mult != 0.0 {
            for j in 0..=self.width {
                self.reduced[j] -= mult * self.rows[pivot_row][j];
            }
            self.reduced[pivot_col] = 0.0;
        }
        self.basis[pivot_row] = pivot_col;
    }

    /// Runs simplex iterations until optimal or unbounded. Only columns
    /// below `enterable` may enter the basis (this bars artificials in
    /// phase 2). Bland's rule: the entering column is the smallest index
    /// with a negative reduced cost; the leaving row is the minimum-ratio
    /// row, ties broken by smallest basic variable index.
    fn iterate(&mut self, enterable: usize) -> PivotResult {
        let max_iters = 200 * (self.rows.len() + self.width + 10);
        for _ in 0..max_iters {
            let entering = (0..enterable).find(|&j| self.reduced[j] < -EPS);
            let Some(col) = entering else {
                return PivotResult::Optimal;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((best_row, best_ratio)) => {
                            if ratio < best_ratio - EPS
                                || (ratio < best_ratio + EPS
                                    && self.basis[i] < self.basis[best_row])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leaving {
                Some((row, _)) => self.pivot(row, col),
                None => return PivotResult::Unbounded,
            }
        }
        // Bland's rule cannot cycle; reaching this means the tolerances
        // are inconsistent for this instance
        panic!("simplex iteration limit exceeded");
    }
}

/// Solves `min objective.x` subject to `rows` and `x >= 0`.
pub(crate) fn solve_lp(problem: &LpProblem) -> LpOutcome {
    let n = problem.ncols;
    let m = problem.rows.len();

    // normalize rhs signs, then count auxiliary columns
    let mut rows: Vec<LpRow> = problem
        .rows
        .iter()
        .map(|r| {
            debug_assert_eq!(r.coeffs.len(), n);
            if r.rhs < 0.0 {
                let sense = match r.sense {
                    ConstraintSense::Le => ConstraintSense::Ge,
                    ConstraintSense::Ge => ConstraintSense::Le,
                    ConstraintSense::Eq => ConstraintSense::Eq,
                };
                LpRow {
                    coeffs: r.coeffs.iter().map(|c| -c).collect(),
                    sense,
                    rhs: -r.rhs,
                }
            } else {
                r.clone()
            }
        })
        .collect();

    let num_slack = rows
        .iter()
        .filter(|r| r.sense != ConstraintSense::Eq)
        .count();
    let num_artificial = rows
        .iter()
        .filter(|r| r.sense != ConstraintSense::Le)
        .count();
    let width = n + num_slack + num_artificial;

    let mut tableau_rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_cursor = n;
    let mut artificial_cursor = n + num_slack;
    for r in rows.drain(..) {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(&r.coeffs);
        row[width] = r.rhs;
        match r.sense {
            ConstraintSense::Le => {
                row[slack_cursor] = 1.0;
                basis.push(slack_cursor);
                slack_cursor += 1;
            }
            ConstraintSense::Ge => {
                row[slack_cursor] = -1.0;
                slack_cursor += 1;
                row[artificial_cursor] = 1.0;
                basis.push(artificial_cursor);
                artificial_cursor += 1;
            }
            ConstraintSense::Eq => {
                row[artificial_cursor] = 1.0;
                basis.push(artificial_cursor);
                artificial_cursor += 1;
            }
        }
        tableau_rows.push(row);
    }

    let mut t = Tableau {
        rows: tableau_rows,
        reduced: vec![0.0; width + 1],
        basis,
        width,
    };

    let enterable_phase2 = n + num_slack;

    if num_artificial > 0 {
        let mut phase1_cost = vec![0.0; width];
        for c in phase1_cost.iter_mut().skip(enterable_phase2) {
            *c = 1.0;
        }
        t.price(&phase1_cost);
        match t.iterate(width) {
            PivotResult::Unbounded => unreachable!("phase-1 objective is bounded below by zero"),
            PivotResult::Optimal => {}
        }
        let infeasibility = -t.reduced[width];
        if infeasibility > PHASE1_TOL {
            return LpOutcome::Infeasible;
        }
        // drive any artificial still basic (at zero) out of the basis,
        // dropping rows that are redundant
        let mut row = 0;
        while row < t.rows.len() {
            if t.basis[row] >= enterable_phase2 {
                let col = (0..enterable_phase2).find(|&j| t.rows[row][j].abs() > EPS);
                match col {
                    Some(j) => t.pivot(row, j),
                    None => {
                        t.rows.remove(row);
                        t.basis.remove(row);
                        continue;
                    }
                }
            }
            row += 1;
        }
    }

    let mut phase2_cost = vec![0.0; width];
    phase2_cost[..n].copy_from_slice(&problem.objective);
    t.price(&phase2_cost);
    match t.iterate(enterable_phase2) {
        PivotResult::Unbounded => LpOutcome::Unbounded,
        PivotResult::Optimal => {
            let mut x = vec![0.0; n];
            for (i, &b) in t.basis.iter().enumerate() {
                if b < n {
                    x[b] = t.rhs(i);
                }
            }
            LpOutcome::Optimal { x }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(coeffs: Vec<f64>, rhs: f64) -> LpRow {
        LpRow {
            coeffs,
            sense: ConstraintSense::Le,
            rhs,
        }
    }

    fn ge(coeffs: Vec<f64>, rhs: f64) -> LpRow {
        LpRow {
            coeffs,
            sense: ConstraintSense::Ge,
            rhs,
        }
    }

    #[test]
    fn solves_textbook_max_problem() {
        // max 3a + 5b st a <= 4, 2b <= 12, 3a + 2b <= 18  => 36 at (2, 6)
        let p = LpProblem {
            ncols: 2,
            rows: vec![
                le(vec![1.0, 0.0], 4.0),
                le(vec![0.0, 2.0], 12.0),
                le(vec![3.0, 2.0], 18.0),
            ],
            objective: vec![-3.0, -5.0],
        };
        match solve_lp(&p) {
            LpOutcome::Optimal { x } => {
                assert!((x[0] - 2.0).abs() < 1e-9);
                assert!((x[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_system() {
        let p = LpProblem {
            ncols: 1,
            rows: vec![ge(vec![1.0], 5.0), le(vec![1.0], 3.0)],
            objective: vec![1.0],
        };
        assert_eq!(solve_lp(&p), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded_direction() {
        let p = LpProblem {
            ncols: 1,
            rows: vec![ge(vec![1.0], 1.0)],
            objective: vec![-1.0],
        };
        assert_eq!(solve_lp(&p), LpOutcome::Unbounded);
    }

    #[test]
    fn handles_equality_rows() {
        // min a + b st a + b = 10, a - b >= 2 => 10 anywhere on the segment
        let p = LpProblem {
            ncols: 2,
            rows: vec![
                LpRow {
                    coeffs: vec![1.0, 1.0],
                    sense: ConstraintSense::Eq,
                    rhs: 10.0,
                },
                ge(vec![1.0, -1.0], 2.0),
            ],
            objective: vec![1.0, 1.0],
        };
        match solve_lp(&p) {
            LpOutcome::Optimal { x } => {
                assert!((x[0] + x[1] - 10.0).abs() < 1e-9);
                assert!(x[0] - x[1] >= 2.0 - 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // multiple redundant constraints through the origin
        let p = LpProblem {
            ncols: 2,
            rows: vec![
                le(vec![1.0, 1.0], 0.0),
                le(vec![2.0, 2.0], 0.0),
                le(vec![1.0, 2.0], 0.0),
                ge(vec![1.0, 0.0], 0.0),
            ],
            objective: vec![-1.0, -1.0],
        };
        match solve_lp(&p) {
            LpOutcome::Optimal { x } => {
                assert!(x[0].abs() < 1e-9 && x[1].abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
