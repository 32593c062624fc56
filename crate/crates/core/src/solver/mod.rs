//! Desk-scale exact LP/MILP solver: simplex relaxation plus branch-and-bound.
//!
//! Serves as the program checker's execution oracle and the evaluation
//! harness's answer producer. Determinism is a contract: identical
//! `(model, config)` pairs yield bitwise-identical statuses and objectives.

mod simplex;

use crate::model::{ConstraintSense, ObjectiveSense, OptModel};
use simplex::{LpOutcome, LpProblem, LpRow};
use std::collections::BTreeMap;
use thiserror::Error;

/// Bounds imposed on integer variables that are declared without finite
/// bounds; branch-and-bound needs a finite box.
const INTEGER_BOUND_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NodeLimit => "node_limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Present iff optimal: the scalarized objective at `assignment`.
    pub objective: Option<f64>,
    pub assignment: Option<BTreeMap<String, f64>>,
}

impl SolveResult {
    fn status_only(status: SolveStatus) -> Self {
        SolveResult {
            status,
            objective: None,
            assignment: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub integer_tol: f64,
    pub node_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-7,
            integer_tol: 1e-6,
            node_limit: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("assignment missing variable {0}")]
    MissingVariable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentEval {
    pub feasible: bool,
    pub objective: f64,
    pub violations: Vec<String>,
}

/// Weighted sum of the objective expressions with max terms negated: the
/// quantity branch-and-bound minimizes.
fn scalarized_min_value(model: &OptModel, assignment: &BTreeMap<String, f64>) -> f64 {
    model
        .objectives
        .iter()
        .map(|o| {
            let v = o.expr.evaluate(assignment) * o.weight;
            match o.sense {
                ObjectiveSense::Min => v,
                ObjectiveSense::Max => -v,
            }
        })
        .sum()
}

/// The objective value reported to callers. For uniform-sense models this is
/// the weighted sum in the declared sense (a pure max model reports the
/// maximum, not its negation); mixed-sense models report the minimized
/// combination.
pub fn scalarized_value(model: &OptModel, assignment: &BTreeMap<String, f64>) -> f64 {
    let all_max = model
        .objectives
        .iter()
        .all(|o| o.sense == ObjectiveSense::Max);
    let min_form = scalarized_min_value(model, assignment);
    if all_max {
        -min_form
    } else {
        min_form
    }
}

/// How a model variable maps onto nonnegative LP columns.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// `x = offset + col`
    Shift { col: usize, offset: f64 },
    /// `x = offset - col` (finite upper, no finite lower)
    Mirror { col: usize, offset: f64 },
    /// `x = pos - neg` (free variable)
    Split { pos: usize, neg: usize },
}

struct Lowered {
    problem: LpProblem,
    maps: Vec<(String, ColMap)>,
}

/// Lowers a model (with per-variable bound overrides) to the canonical
/// nonnegative LP form, dropping integrality.
fn lower(model: &OptModel, bounds: &BTreeMap<String, (f64, f64)>) -> Result<Lowered, SolveResult> {
    let mut maps = Vec::with_capacity(model.variables.len());
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new(); // col <= bound

    for v in &model.variables {
        let (lower, upper) = bounds
            .get(&v.name)
            .copied()
            .unwrap_or((v.lower, v.upper));
        if lower > upper {
            return Err(SolveResult::status_only(SolveStatus::Infeasible));
        }
        let map = if lower.is_finite() {
            let col = ncols;
            ncols += 1;
            if upper.is_finite() {
                upper_rows.push((col, upper - lower));
            }
            ColMap::Shift { col, offset: lower }
        } else if upper.is_finite() {
            let col = ncols;
            ncols += 1;
            ColMap::Mirror { col, offset: upper }
        } else {
            let pos = ncols;
            let neg = ncols + 1;
            ncols += 2;
            ColMap::Split { pos, neg }
        };
        maps.push((v.name.clone(), map));
    }

    let col_of = |name: &str| -> &ColMap {
        maps.iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .expect("validated model references declared variables")
    };

    let mut rows = Vec::new();
    for c in &model.constraints {
        let mut coeffs = vec![0.0; ncols];
        let mut rhs = c.rhs - c.expr.constant;
        for (var, coeff) in c.expr.terms() {
            match *col_of(var) {
                ColMap::Shift { col, offset } => {
                    coeffs[col] += coeff;
                    rhs -= coeff * offset;
                }
                ColMap::Mirror { col, offset } => {
                    coeffs[col] -= coeff;
                    rhs -= coeff * offset;
                }
                ColMap::Split { pos, neg } => {
                    coeffs[pos] += coeff;
                    coeffs[neg] -= coeff;
                }
            }
        }
        rows.push(LpRow {
            coeffs,
            sense: c.sense,
            rhs,
        });
    }
    for (col, bound) in upper_rows {
        let mut coeffs = vec![0.0; ncols];
        coeffs[col] = 1.0;
        rows.push(LpRow {
            coeffs,
            sense: ConstraintSense::Le,
            rhs: bound,
        });
    }

    let mut objective = vec![0.0; ncols];
    for o in &model.objectives {
        let sign = match o.sense {
            ObjectiveSense::Min => o.weight,
            ObjectiveSense::Max => -o.weight,
        };
        for (var, coeff) in o.expr.terms() {
            let w = sign * coeff;
            match *col_of(var) {
                ColMap::Shift { col, .. } => objective[col] += w,
                ColMap::Mirror { col, .. } => objective[col] -= w,
                ColMap::Split { pos, neg } => {
                    objective[pos] += w;
                    objective[neg] -= w;
                }
            }
        }
    }

    Ok(Lowered {
        problem: LpProblem {
            ncols,
            rows,
            objective,
        },
        maps,
    })
}

fn recover_assignment(maps: &[(String, ColMap)], x: &[f64]) -> BTreeMap<String, f64> {
    maps.iter()
        .map(|(name, map)| {
            let value = match *map {
                ColMap::Shift { col, offset } => offset + x[col],
                ColMap::Mirror { col, offset } => offset - x[col],
                ColMap::Split { pos, neg } => x[pos] - x[neg],
            };
            (name.clone(), value)
        })
        .collect()
}

fn solve_lp_with_bounds(model: &OptModel, bounds: &BTreeMap<String, (f64, f64)>) -> SolveResult {
    let lowered = match lower(model, bounds) {
        Ok(l) => l,
        Err(status) => return status,
    };
    match simplex::solve_lp(&lowered.problem) {
        LpOutcome::Infeasible => SolveResult::status_only(SolveStatus::Infeasible),
        LpOutcome::Unbounded => SolveResult::status_only(SolveStatus::Unbounded),
        LpOutcome::Optimal { x } => {
            let assignment = recover_assignment(&lowered.maps, &x);
            let objective = scalarized_value(model, &assignment);
            SolveResult {
                status: SolveStatus::Optimal,
                objective: Some(objective),
                assignment: Some(assignment),
            }
        }
    }
}

/// Solves the continuous relaxation (integrality dropped, declared bounds
/// kept). Vertex-optimal for feasible bounded problems.
pub fn solve_relaxation(model: &OptModel, _cfg: &SolverConfig) -> SolveResult {
    solve_lp_with_bounds(model, &BTreeMap::new())
}

/// Solves the model exactly, honoring integer/binary restrictions via
/// branch-and-bound over the simplex relaxation. Deterministic given
/// `(model, cfg)`: most-fractional branching with lexicographic tie-break,
/// floor branch explored first.
pub fn solve(model: &OptModel, cfg: &SolverConfig) -> SolveResult {
    if !model.has_integrality() {
        return solve_relaxation(model, cfg);
    }

    let mut root_bounds: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for v in &model.variables {
        if v.kind.is_integral() {
            let lower = if v.lower.is_finite() {
                v.lower.ceil()
            } else {
                log::warn!(
                    "integer variable {} has no finite lower bound; capping at {}",
                    v.name,
                    -INTEGER_BOUND_CAP
                );
                -INTEGER_BOUND_CAP
            };
            let upper = if v.upper.is_finite() {
                v.upper.floor()
            } else {
                log::warn!(
                    "integer variable {} has no finite upper bound; capping at {}",
                    v.name,
                    INTEGER_BOUND_CAP
                );
                INTEGER_BOUND_CAP
            };
            root_bounds.insert(v.name.clone(), (lower, upper));
        }
    }

    let integral_names: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind.is_integral())
        .map(|v| v.name.as_str())
        .collect();

    let mut stack = vec![root_bounds];
    let mut nodes_used = 0usize;
    let mut incumbent: Option<(f64, BTreeMap<String, f64>)> = None; // (min-form value, snapped assignment)

    while let Some(bounds) = stack.pop() {
        if nodes_used >= cfg.node_limit {
            return SolveResult::status_only(SolveStatus::NodeLimit);
        }
        nodes_used += 1;

        let relaxed = match solve_lp_with_bounds(model, &bounds) {
            r if r.status == SolveStatus::Infeasible => continue,
            r if r.status == SolveStatus::Unbounded => {
                // children only tighten bounds, so this is the root
                return SolveResult::status_only(SolveStatus::Unbounded);
            }
            r => r,
        };
        let assignment = relaxed.assignment.expect("optimal relaxation has values");
        let node_value = scalarized_min_value(model, &assignment);
        if let Some((best, _)) = &incumbent {
            if node_value >= best - 1e-9 {
                continue;
            }
        }

        // most fractional variable; ties by lexicographic name (names
        // iterate in declaration order, so scan for the strict maximum
        // over name-sorted candidates)
        let mut branch: Option<(f64, &str, f64)> = None; // (score, name, value)
        let mut sorted = integral_names.clone();
        sorted.sort_unstable();
        for name in sorted {
            let value = assignment[name];
            let frac = (value - value.round()).abs();
            if frac > cfg.integer_tol {
                let score = frac.min(1.0 - frac);
                let better = match &branch {
                    None => true,
                    Some((best_score, _, _)) => score > *best_score,
                };
                if better {
                    branch = Some((score, name, value));
                }
            }
        }

        match branch {
            None => {
                // integer-feasible: snap and evaluate exactly
                let mut snapped = assignment;
                for name in &integral_names {
                    if let Some(v) = snapped.get_mut(*name) {
                        *v = v.round();
                    }
                }
                let value = scalarized_min_value(model, &snapped);
                let improves = match &incumbent {
                    None => true,
                    Some((best, _)) => value < *best,
                };
                if improves {
                    incumbent = Some((value, snapped));
                }
            }
            Some((_, name, value)) => {
                let (lo, hi) = bounds
                    .get(name)
                    .copied()
                    .expect("integral variables always carry node bounds");
                let mut up = bounds.clone();
                up.insert(name.to_string(), (value.ceil(), hi));
                let mut down = bounds;
                down.insert(name.to_string(), (lo, value.floor()));
                stack.push(up);
                stack.push(down); // popped first: floor branch leads
            }
        }
    }

    match incumbent {
        None => SolveResult::status_only(SolveStatus::Infeasible),
        Some((_, assignment)) => {
            let objective = scalarized_value(model, &assignment);
            SolveResult {
                status: SolveStatus::Optimal,
                objective: Some(objective),
                assignment: Some(assignment),
            }
        }
    }
}

/// Checks a complete assignment against every bound, integrality condition,
/// and constraint; names each breach.
pub fn evaluate_assignment(
    model: &OptModel,
    assignment: &BTreeMap<String, f64>,
    cfg: &SolverConfig,
) -> Result<AssignmentEval, AssignmentError> {
    for v in &model.variables {
        if !assignment.contains_key(&v.name) {
            return Err(AssignmentError::MissingVariable(v.name.clone()));
        }
    }

    let mut violations = Vec::new();
    for v in &model.variables {
        let value = assignment[&v.name];
        let tol = cfg.feasibility_tol * (1.0 + value.abs());
        if value < v.lower - tol {
            violations.push(format!(
                "variable {} = {} below lower bound {}",
                v.name, value, v.lower
            ));
        }
        if value > v.upper + tol {
            violations.push(format!(
                "variable {} = {} above upper bound {}",
                v.name, value, v.upper
            ));
        }
        if v.kind.is_integral() && (value - value.round()).abs() > cfg.integer_tol {
            violations.push(format!("variable {} = {} not integral", v.name, value));
        }
    }
    for c in &model.constraints {
        let lhs = c.expr.evaluate(assignment);
        let tol = cfg.feasibility_tol * (1.0 + c.rhs.abs());
        let violated = match c.sense {
            ConstraintSense::Le => lhs > c.rhs + tol,
            ConstraintSense::Ge => lhs < c.rhs - tol,
            ConstraintSense::Eq => (lhs - c.rhs).abs() > tol,
        };
        if violated {
            violations.push(format!(
                "constraint {} violated: {} {} {}",
                c.name, lhs, c.sense, c.rhs
            ));
        }
    }

    Ok(AssignmentEval {
        feasible: violations.is_empty(),
        objective: scalarized_value(model, assignment),
        violations,
    })
}
