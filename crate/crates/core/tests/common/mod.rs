//! Shared test oracles: exhaustive lattice enumeration for small MILPs and
//! seeded random model generators. The enumeration path evaluates
//! constraints itself (independently of the solver); only models with
//! continuous variables lean on the LP relaxation with integers pinned, as
//! the oracle contract prescribes.

#![allow(dead_code)]

use orforge::model::{
    Constraint, ConstraintSense, LinearExpr, Objective, ObjectiveSense, OptModel, VarKind,
    VariableDecl,
};
use orforge::solver::{solve_relaxation, SolveStatus, SolverConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

fn min_form_value(model: &OptModel, assignment: &BTreeMap<String, f64>) -> f64 {
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

fn reported_from_min_form(model: &OptModel, min_form: f64) -> f64 {
    if model.objectives.iter().all(|o| o.sense == ObjectiveSense::Max) {
        -min_form
    } else {
        min_form
    }
}

fn constraints_hold(model: &OptModel, assignment: &BTreeMap<String, f64>) -> bool {
    model.constraints.iter().all(|c| {
        let lhs = c.expr.evaluate(assignment);
        let tol = 1e-7 * (1.0 + c.rhs.abs());
        match c.sense {
            ConstraintSense::Le => lhs <= c.rhs + tol,
            ConstraintSense::Ge => lhs >= c.rhs - tol,
            ConstraintSense::Eq => (lhs - c.rhs).abs() <= tol,
        }
    })
}

/// Iterates every integer lattice point of the integral variables.
pub fn for_each_lattice_point<F: FnMut(&BTreeMap<String, f64>)>(model: &OptModel, mut visit: F) {
    let integral: Vec<(&str, i64, i64)> = model
        .variables
        .iter()
        .filter(|v| v.kind.is_integral())
        .map(|v| {
            assert!(
                v.lower.is_finite() && v.upper.is_finite(),
                "lattice enumeration needs finite bounds on {}",
                v.name
            );
            (v.name.as_str(), v.lower.ceil() as i64, v.upper.floor() as i64)
        })
        .collect();
    if integral.iter().any(|(_, lo, hi)| lo > hi) {
        return;
    }
    let mut point: Vec<i64> = integral.iter().map(|(_, lo, _)| *lo).collect();
    loop {
        let assignment: BTreeMap<String, f64> = integral
            .iter()
            .zip(&point)
            .map(|((name, _, _), v)| (name.to_string(), *v as f64))
            .collect();
        visit(&assignment);
        let mut idx = point.len();
        loop {
            if idx == 0 {
                return;
            }
            idx -= 1;
            if point[idx] < integral[idx].2 {
                point[idx] += 1;
                for later in idx + 1..point.len() {
                    point[later] = integral[later].1;
                }
                break;
            }
        }
        if point.is_empty() {
            return;
        }
    }
}

/// Exhaustive MILP oracle. Pure-integer models are checked by direct
/// constraint evaluation; models with continuous variables pin the integers
/// and solve the continuous relaxation of the remainder.
pub fn enumerate_optimum(model: &OptModel, cfg: &SolverConfig) -> OracleOutcome {
    let has_continuous = model
        .variables
        .iter()
        .any(|v| v.kind == VarKind::Continuous);
    let mut best: Option<f64> = None;
    let mut unbounded = false;

    if !has_continuous {
        for_each_lattice_point(model, |assignment| {
            let in_bounds = model.variables.iter().all(|v| {
                let value = assignment[&v.name];
                value >= v.lower - 1e-9 && value <= v.upper + 1e-9
            });
            if in_bounds && constraints_hold(model, assignment) {
                let value = min_form_value(model, assignment);
                if best.is_none_or(|b| value < b) {
                    best = Some(value);
                }
            }
        });
    } else {
        for_each_lattice_point(model, |assignment| {
            if unbounded {
                return;
            }
            let mut pinned = model.clone();
            for v in &mut pinned.variables {
                if let Some(value) = assignment.get(&v.name) {
                    v.lower = *value;
                    v.upper = *value;
                    v.kind = VarKind::Continuous;
                }
            }
            let sub = solve_relaxation(&pinned, cfg);
            match sub.status {
                SolveStatus::Optimal => {
                    let full = sub.assignment.expect("optimal relaxation has values");
                    let value = min_form_value(model, &full);
                    if best.is_none_or(|b| value < b) {
                        best = Some(value);
                    }
                }
                SolveStatus::Unbounded => unbounded = true,
                _ => {}
            }
        });
    }

    if unbounded {
        OracleOutcome::Unbounded
    } else {
        match best {
            Some(min_form) => OracleOutcome::Optimal(reported_from_min_form(model, min_form)),
            None => OracleOutcome::Infeasible,
        }
    }
}

/// Number of lattice points the oracle would visit.
pub fn lattice_size(model: &OptModel) -> u64 {
    model
        .variables
        .iter()
        .filter(|v| v.kind.is_integral())
        .map(|v| (v.upper.floor() as i64 - v.lower.ceil() as i64 + 1).max(0) as u64)
        .product()
}

pub struct RandomMilpParams {
    pub max_int_vars: usize,
    pub max_span: i64,
    /// Lattice-point budget for pure-integer models.
    pub lattice_budget: u64,
    /// Tighter budget when a continuous variable forces an LP per point.
    pub continuous_lattice_budget: u64,
    pub continuous_prob: f64,
}

impl Default for RandomMilpParams {
    fn default() -> Self {
        RandomMilpParams {
            max_int_vars: 6,
            max_span: 20,
            lattice_budget: 20_000,
            continuous_lattice_budget: 300,
            continuous_prob: 0.25,
        }
    }
}

/// A random small MILP with finite integer boxes sized to fit the lattice
/// budget; integer coefficients keep the arithmetic exact.
pub fn random_milp(rng: &mut ChaCha8Rng, params: &RandomMilpParams) -> OptModel {
    let with_continuous = rng.random_bool(params.continuous_prob);
    let n_int = rng.random_range(1..=params.max_int_vars);
    let mut variables = Vec::new();
    let mut budget = if with_continuous {
        params.continuous_lattice_budget
    } else {
        params.lattice_budget
    };
    for i in 0..n_int {
        let max_span_here = params.max_span.min(budget.saturating_sub(1).min(64) as i64);
        let span = if max_span_here <= 0 {
            0
        } else {
            rng.random_range(0..=max_span_here)
        };
        budget = (budget / (span as u64 + 1)).max(1);
        let lower = rng.random_range(-5..=5);
        let (kind, lower, upper) = if span == 1 && lower == 0 && rng.random_bool(0.5) {
            (VarKind::Binary, 0, 1)
        } else {
            (VarKind::Integer, lower, lower + span)
        };
        variables.push(VariableDecl {
            name: format!("v{i}"),
            kind,
            lower: lower as f64,
            upper: upper as f64,
        });
    }
    if with_continuous {
        variables.push(VariableDecl {
            name: "c0".to_string(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: rng.random_range(1..=10) as f64,
        });
    }

    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let sample_point = |rng: &mut ChaCha8Rng, variables: &[VariableDecl]| -> BTreeMap<String, f64> {
        variables
            .iter()
            .map(|v| {
                let lo = v.lower as i64;
                let hi = v.upper as i64;
                (v.name.clone(), rng.random_range(lo..=hi) as f64)
            })
            .collect()
    };

    let n_constraints = rng.random_range(1..=4);
    let mut constraints = Vec::new();
    for c in 0..n_constraints {
        let mut expr = LinearExpr::new();
        let n_terms = rng.random_range(1..=names.len());
        let mut chosen: Vec<usize> = (0..names.len()).collect();
        for _ in 0..names.len() - n_terms {
            let at = rng.random_range(0..chosen.len());
            chosen.remove(at);
        }
        for &idx in &chosen {
            let mut coeff = 0;
            while coeff == 0 {
                coeff = rng.random_range(-4..=4);
            }
            expr.add_term(coeff as f64, names[idx].clone());
        }
        // anchor the rhs near an achievable value so feasibility is common
        // but not guaranteed
        let anchor = expr.evaluate(&sample_point(rng, &variables)).round();
        let (sense, rhs) = match rng.random_range(0..10) {
            0 => (ConstraintSense::Eq, anchor),
            n if n < 6 => (ConstraintSense::Le, anchor + rng.random_range(-2..=6) as f64),
            _ => (ConstraintSense::Ge, anchor - rng.random_range(-2..=6) as f64),
        };
        constraints.push(Constraint::new(format!("c{c}"), expr, sense, rhs));
    }

    let mut objective_expr = LinearExpr::new();
    for name in &names {
        let mut coeff = 0;
        while coeff == 0 {
            coeff = rng.random_range(-5..=5);
        }
        objective_expr.add_term(coeff as f64, name.clone());
    }
    let sense = if rng.random_bool(0.5) {
        ObjectiveSense::Min
    } else {
        ObjectiveSense::Max
    };

    OptModel {
        variables,
        constraints,
        objectives: vec![Objective::new(sense, objective_expr)],
        requirements: vec![],
    }
}

/// How a generated big-M model is (mis)built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BigMVariant {
    Correct,
    CorrectScaled,
    OneSided,
    SmallM,
    WrongRhs,
}

pub struct BigMCase {
    pub model: OptModel,
    pub xi: String,
    pub xj: String,
    pub threshold: f64,
    pub variant: BigMVariant,
}

/// A small model enforcing (or failing to enforce) `|x - z| >= a` with
/// integer boxes of span <= 10.
pub fn random_bigm_case(rng: &mut ChaCha8Rng) -> BigMCase {
    let hi_x = rng.random_range(4..=10);
    let hi_z = rng.random_range(4..=10);
    let threshold = rng.random_range(1..=6) as f64;
    let span = (hi_x as f64).max(hi_z as f64);
    let variant = match rng.random_range(0..5) {
        0 => BigMVariant::Correct,
        1 => BigMVariant::CorrectScaled,
        2 => BigMVariant::OneSided,
        3 => BigMVariant::SmallM,
        _ => BigMVariant::WrongRhs,
    };
    let m = match variant {
        BigMVariant::SmallM => (threshold + span - rng.random_range(1..=3) as f64).max(1.0),
        _ => threshold + span + rng.random_range(0..=5) as f64,
    };
    let scale = if variant == BigMVariant::CorrectScaled {
        rng.random_range(2..=3) as f64
    } else {
        1.0
    };

    let variables = vec![
        VariableDecl {
            name: "x".into(),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: hi_x as f64,
        },
        VariableDecl {
            name: "z".into(),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: hi_z as f64,
        },
        VariableDecl::binary("d"),
    ];

    let mut constraints = vec![Constraint::new(
        "load",
        LinearExpr::from_terms([(1.0, "x"), (1.0, "z")]),
        ConstraintSense::Le,
        (hi_x + hi_z) as f64,
    )];
    let plus = Constraint::new(
        "gap_pos",
        LinearExpr::from_terms([(scale, "x"), (-scale, "z"), (scale * m, "d")]),
        ConstraintSense::Ge,
        scale * threshold,
    );
    let minus_rhs = match variant {
        BigMVariant::WrongRhs => scale * (threshold - m) + 1.0,
        _ => scale * (threshold - m),
    };
    let minus = Constraint::new(
        "gap_neg",
        LinearExpr::from_terms([(scale, "z"), (-scale, "x"), (-scale * m, "d")]),
        ConstraintSense::Ge,
        minus_rhs,
    );
    constraints.push(plus);
    if variant != BigMVariant::OneSided {
        constraints.push(minus);
    }

    let model = OptModel {
        variables,
        constraints,
        objectives: vec![Objective::new(
            ObjectiveSense::Min,
            LinearExpr::from_terms([(3.0, "x"), (2.0, "z")]),
        )],
        requirements: vec![],
    };
    BigMCase {
        model,
        xi: "x".into(),
        xj: "z".into(),
        threshold,
        variant,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KWayVariant {
    Correct,
    CorrectScaled,
    MissingLink,
    MissingCardinality,
}

pub struct KWayCase {
    pub model: OptModel,
    pub k: usize,
    pub selectors: Vec<String>,
    pub linked: Vec<String>,
    pub variant: KWayVariant,
}

/// A small model that (maybe) enforces "at most k of n linked variables
/// strictly positive".
pub fn random_kway_case(rng: &mut ChaCha8Rng) -> KWayCase {
    let n = rng.random_range(2..=3);
    let k = rng.random_range(0..n);
    let hi = rng.random_range(3..=8) as f64;
    let variant = match rng.random_range(0..4) {
        0 => KWayVariant::Correct,
        1 => KWayVariant::CorrectScaled,
        2 => KWayVariant::MissingLink,
        _ => KWayVariant::MissingCardinality,
    };
    let scale = if variant == KWayVariant::CorrectScaled {
        2.0
    } else {
        1.0
    };

    let mut variables = Vec::new();
    let mut selectors = Vec::new();
    let mut linked = Vec::new();
    for i in 0..n {
        variables.push(VariableDecl::binary(format!("y{i}")));
        selectors.push(format!("y{i}"));
        variables.push(VariableDecl {
            name: format!("x{i}"),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: hi,
        });
        linked.push(format!("x{i}"));
    }

    let mut constraints = Vec::new();
    if variant != KWayVariant::MissingCardinality {
        let expr = LinearExpr::from_terms(selectors.iter().map(|s| (scale, s.clone())));
        constraints.push(Constraint::new(
            "cap",
            expr,
            ConstraintSense::Le,
            scale * k as f64,
        ));
    }
    let skip_link = if variant == KWayVariant::MissingLink {
        rng.random_range(0..n)
    } else {
        n
    };
    for i in 0..n {
        if i == skip_link {
            continue;
        }
        constraints.push(Constraint::new(
            format!("link{i}"),
            LinearExpr::from_terms([(1.0, format!("x{i}")), (-hi, format!("y{i}"))]),
            ConstraintSense::Le,
            0.0,
        ));
    }

    let objective = Objective::new(
        ObjectiveSense::Max,
        LinearExpr::from_terms(linked.iter().map(|l| (1.0, l.clone()))),
    );
    let model = OptModel {
        variables,
        constraints,
        objectives: vec![objective],
        requirements: vec![],
    };
    KWayCase {
        model,
        k,
        selectors,
        linked,
        variant,
    }
}
