//! Deterministic structural checks for the two specially-verified modeling
//! techniques: big-M linearization of `|xi - xj| >= a` and "at most K of N"
//! selection. Constraints are matched after normalization, up to positive
//! scaling, with 1e-9 coefficient tolerance.

use crate::model::{Constraint, ConstraintSense, OptModel, VarKind};
use crate::report::{CheckMode, CheckReport, CheckStage};
use std::collections::BTreeMap;

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs() + b.abs())
}

/// A constraint normalized to `sum(terms) >= rhs`.
struct GeView {
    terms: BTreeMap<String, f64>,
    rhs: f64,
}

fn ge_views(c: &Constraint) -> Vec<GeView> {
    let direct = || GeView {
        terms: c.expr.terms().map(|(v, k)| (v.to_string(), k)).collect(),
        rhs: c.rhs - c.expr.constant,
    };
    let negated = || GeView {
        terms: c.expr.terms().map(|(v, k)| (v.to_string(), -k)).collect(),
        rhs: -(c.rhs - c.expr.constant),
    };
    match c.sense {
        ConstraintSense::Ge => vec![direct()],
        ConstraintSense::Le => vec![negated()],
        ConstraintSense::Eq => vec![direct(), negated()],
    }
}

/// A constraint normalized to `sum(terms) <= rhs`.
struct LeView {
    terms: BTreeMap<String, f64>,
    rhs: f64,
}

fn le_views(c: &Constraint) -> Vec<LeView> {
    ge_views(c)
        .into_iter()
        .map(|v| LeView {
            terms: v.terms.into_iter().map(|(k, c)| (k, -c)).collect(),
            rhs: -v.rhs,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum BigMBranch {
    /// `u - v + M*y >= a` (active side when y = 0)
    Plus { u: String, v: String, y: String, m: f64 },
    /// `u - v - M*y >= a - M` (active side when y = 1)
    Minus { u: String, v: String, y: String, m: f64 },
    /// bare `u - v >= a` with no switch
    Bare { u: String, v: String },
}

fn classify_bigm_view(
    view: &GeView,
    xi: &str,
    xj: &str,
    threshold: f64,
    binaries: &[&str],
) -> Option<BigMBranch> {
    let ci = view.terms.get(xi).copied()?;
    let cj = view.terms.get(xj).copied()?;
    // orient so the positive coefficient leads
    let (u, v, p, q) = if ci > 0.0 && rel_close(cj, -ci) {
        (xi, xj, ci, cj)
    } else if cj > 0.0 && rel_close(ci, -cj) {
        (xj, xi, cj, ci)
    } else {
        return None;
    };
    debug_assert!(rel_close(q, -p));

    match view.terms.len() {
        2 => {
            if rel_close(view.rhs, p * threshold) {
                Some(BigMBranch::Bare {
                    u: u.to_string(),
                    v: v.to_string(),
                })
            } else {
                None
            }
        }
        3 => {
            let (y, cy) = view
                .terms
                .iter()
                .find(|(name, _)| name.as_str() != xi && name.as_str() != xj)?;
            if !binaries.contains(&y.as_str()) {
                return None;
            }
            if *cy > 0.0 && rel_close(view.rhs, p * threshold) {
                Some(BigMBranch::Plus {
                    u: u.to_string(),
                    v: v.to_string(),
                    y: y.clone(),
                    m: cy / p,
                })
            } else if *cy < 0.0 && rel_close(view.rhs, p * threshold + cy) {
                Some(BigMBranch::Minus {
                    u: u.to_string(),
                    v: v.to_string(),
                    y: y.clone(),
                    m: -cy / p,
                })
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Verifies that the constraint set realizes `|xi - xj| >= threshold` via
/// the big-M pattern: a binary switch `y` and constant `M > 0` with both
/// branches present and `M` large enough that the inactive branch can never
/// cut a feasible point. A zero threshold passes vacuously.
pub fn check_bigm_requirement(
    model: &OptModel,
    xi: &str,
    xj: &str,
    threshold: f64,
) -> CheckReport {
    let stage = CheckStage::Constraints;
    if threshold == 0.0 {
        return CheckReport::pass(stage, CheckMode::Deterministic);
    }

    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();

    let mut plus: Vec<(String, String, String, f64)> = Vec::new(); // (u, v, y, M)
    let mut minus: Vec<(String, String, String, f64)> = Vec::new();
    let mut bare: Vec<(String, String)> = Vec::new();
    for c in &model.constraints {
        for view in ge_views(c) {
            match classify_bigm_view(&view, xi, xj, threshold, &binaries) {
                Some(BigMBranch::Plus { u, v, y, m }) => plus.push((u, v, y, m)),
                Some(BigMBranch::Minus { u, v, y, m }) => minus.push((u, v, y, m)),
                Some(BigMBranch::Bare { u, v }) => bare.push((u, v)),
                None => {}
            }
        }
    }

    // a complete pair: plus branch for (u, v) and minus branch for (v, u)
    // with the same switch and the same M
    let mut best_pair: Option<f64> = None;
    for (pu, pv, py, pm) in &plus {
        for (mu, mv, my, mm) in &minus {
            if mu == pv && mv == pu && my == py && rel_close(*pm, *mm) {
                let m = *pm;
                if best_pair.is_none_or(|prev| m > prev) {
                    best_pair = Some(m);
                }
            }
        }
    }

    if let Some(m) = best_pair {
        if m <= 0.0 {
            return CheckReport::fail(
                stage,
                CheckMode::Deterministic,
                format!("abs_ge({xi}, {xj}, {threshold}): big-M constant {m} is not positive"),
            );
        }
        let (vi, vj) = (
            model.variable(xi).expect("requirement variables declared"),
            model.variable(xj).expect("requirement variables declared"),
        );
        let span = f64::max(vi.upper - vj.lower, vj.upper - vi.lower);
        if span.is_finite() {
            let required = threshold + span;
            if m < required - 1e-9 * (1.0 + required.abs()) {
                return CheckReport::fail(
                    stage,
                    CheckMode::Deterministic,
                    format!(
                        "abs_ge({xi}, {xj}, {threshold}): M = {m} insufficient, need M >= \
                         threshold + span = {required}"
                    ),
                );
            }
        } else {
            log::warn!(
                "abs_ge({xi}, {xj}, {threshold}): variable bounds are infinite, \
                 cannot verify that M = {m} is sufficiently large"
            );
        }
        return CheckReport::pass(stage, CheckMode::Deterministic);
    }

    // diagnose what is missing
    if let Some((pu, pv, py, _)) = plus.first() {
        return CheckReport::fail(
            stage,
            CheckMode::Deterministic,
            format!(
                "abs_ge({xi}, {xj}, {threshold}): found branch {pu} - {pv} >= a - M*{py} but \
                 missing branch {pv} - {pu} >= a - M*(1-{py})"
            ),
        );
    }
    if let Some((mu, mv, my, _)) = minus.first() {
        return CheckReport::fail(
            stage,
            CheckMode::Deterministic,
            format!(
                "abs_ge({xi}, {xj}, {threshold}): found branch {mu} - {mv} >= a - M*{my} side but \
                 missing branch {mv} - {mu} >= a - M*(1-{my})"
            ),
        );
    }
    if let Some((u, v)) = bare.first() {
        return CheckReport::fail(
            stage,
            CheckMode::Deterministic,
            format!(
                "abs_ge({xi}, {xj}, {threshold}): only one side is enforced ({u} - {v} >= \
                 {threshold} with no binary switch); missing branch {v} - {u} >= a - M*(1-y)"
            ),
        );
    }
    CheckReport::fail(
        stage,
        CheckMode::Deterministic,
        format!(
            "abs_ge({xi}, {xj}, {threshold}): no constraints enforce |{xi} - {xj}| >= \
             {threshold}; expected a big-M pair with a binary switch"
        ),
    )
}

/// Verifies "at most k of the linked variables active": a cardinality
/// constraint `sum(selectors) <= k` plus one linking constraint
/// `x - M*y <= 0` per pair. Passes vacuously when `k >= N`.
pub fn check_kway_requirement(
    model: &OptModel,
    k: usize,
    selectors: &[String],
    linked: &[String],
) -> CheckReport {
    let stage = CheckStage::Constraints;
    if k >= selectors.len() {
        return CheckReport::pass(stage, CheckMode::Deterministic);
    }

    let views: Vec<LeView> = model.constraints.iter().flat_map(le_views).collect();

    let cardinality_found = views.iter().any(|view| {
        if view.terms.len() != selectors.len() {
            return false;
        }
        let mut scale = None;
        for s in selectors {
            match view.terms.get(s) {
                Some(&c) if c > 0.0 => match scale {
                    None => scale = Some(c),
                    Some(p) if rel_close(p, c) => {}
                    Some(_) => return false,
                },
                _ => return false,
            }
        }
        let p = scale.unwrap_or(1.0);
        rel_close(view.rhs, p * k as f64)
    });
    if !cardinality_found {
        return CheckReport::fail(
            stage,
            CheckMode::Deterministic,
            format!(
                "kway({k}): no cardinality constraint {} <= {k}",
                selectors.join(" + ")
            ),
        );
    }

    for (x, y) in linked.iter().zip(selectors.iter()) {
        let link_found = views.iter().any(|view| {
            if view.terms.len() != 2 {
                return false;
            }
            let (Some(&cx), Some(&cy)) = (view.terms.get(x), view.terms.get(y)) else {
                return false;
            };
            cx > 0.0 && cy < 0.0 && view.rhs.abs() <= 1e-9 * (1.0 + cx.abs() + cy.abs())
        });
        if !link_found {
            return CheckReport::fail(
                stage,
                CheckMode::Deterministic,
                format!("kway({k}): no linking constraint for {x} (expected {x} - M*{y} <= 0)"),
            );
        }
    }

    CheckReport::pass(stage, CheckMode::Deterministic)
}
