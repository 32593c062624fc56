//! Canonical optimization-model representation: variables, linear
//! constraints, objectives, and machine-readable requirement annotations,
//! with a line-oriented text grammar (`.optir`) and structural validation.
//!
//! Grammar, one statement per line, `#` starts a comment:
//!
//! ```text
//! var NAME [continuous|integer|binary] [>= NUM] [<= NUM]
//! min|max [weight NUM] EXPR
//! st NAME: EXPR (<=|>=|=) NUM
//! require abs_ge(X, Y, NUM)
//! require kway(K, [S1, S2, ...], [L1, L2, ...])
//! ```
//!
//! `EXPR` is a sum of terms `COEFF NAME`, `COEFF * NAME`, `NAME`, or a bare
//! constant, joined by `+`/`-`. Numbers are decimal with optional exponent;
//! variable bounds additionally accept `inf`/`-inf`.

mod parser;
mod render;

pub use parser::parse_model;
pub use render::render_model;

use crate::report::{CheckMode, CheckReport, CheckStage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error: {message}")]
    Semantic { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        matches!(self, VarKind::Integer | VarKind::Binary)
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::Continuous => "continuous",
            VarKind::Integer => "integer",
            VarKind::Binary => "binary",
        })
    }
}

/// A declared decision variable. Bounds default to `[0, +inf)`; binaries are
/// fixed to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl VariableDecl {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableDecl {
            name: name.into(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn integer(name: impl Into<String>) -> Self {
        VariableDecl {
            kind: VarKind::Integer,
            ..VariableDecl::continuous(name)
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        VariableDecl {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

/// A linear expression: at most one term per variable plus a constant.
/// Terms are keyed by variable name, so duplicate insertions sum their
/// coefficients and the iteration order is the canonical (sorted) one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearExpr {
    terms: BTreeMap<String, f64>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinearExpr {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    /// Builds an expression from `(coefficient, variable)` pairs; duplicate
    /// variables are summed.
    pub fn from_terms<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (f64, S)>,
        S: Into<String>,
    {
        let mut expr = LinearExpr::new();
        for (coeff, var) in pairs {
            expr.add_term(coeff, var);
        }
        expr
    }

    pub fn add_term(&mut self, coeff: f64, var: impl Into<String>) {
        let var = var.into();
        let entry = self.terms.entry(var.clone()).or_insert(0.0);
        *entry += coeff;
        // summing to exactly zero removes the term, keeping one-term-per-var
        // normalization stable
        if *entry == 0.0 {
            self.terms.remove(&var);
        }
    }

    pub fn coeff(&self, var: &str) -> f64 {
        self.terms.get(var).copied().unwrap_or(0.0)
    }

    /// Terms in canonical order (sorted by variable name).
    pub fn terms(&self) -> impl Iterator<Item = (&str, f64)> {
        self.terms.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(|k| k.as_str())
    }

    /// Evaluates the expression under a (complete) assignment.
    pub fn evaluate(&self, assignment: &BTreeMap<String, f64>) -> f64 {
        self.terms
            .iter()
            .map(|(v, c)| c * assignment.get(v).copied().unwrap_or(0.0))
            .sum::<f64>()
            + self.constant
    }

    pub fn scaled(&self, factor: f64) -> LinearExpr {
        LinearExpr {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
            constant: self.constant * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for ConstraintSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Ge => ">=",
            ConstraintSense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpr,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(
        name: impl Into<String>,
        expr: LinearExpr,
        sense: ConstraintSense,
        rhs: f64,
    ) -> Self {
        Constraint {
            name: name.into(),
            expr,
            sense,
            rhs,
        }
        .normalized()
    }

    /// Moves the expression constant to the right-hand side. Idempotent.
    pub fn normalized(mut self) -> Self {
        self.rhs -= self.expr.constant;
        self.expr.constant = 0.0;
        self
    }

    pub fn is_normalized(&self) -> bool {
        self.expr.constant == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSense {
    Min,
    Max,
}

impl fmt::Display for ObjectiveSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveSense::Min => "min",
            ObjectiveSense::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub expr: LinearExpr,
    pub weight: f64,
}

impl Objective {
    pub fn new(sense: ObjectiveSense, expr: LinearExpr) -> Self {
        Objective {
            sense,
            expr,
            weight: 1.0,
        }
    }

    pub fn weighted(sense: ObjectiveSense, expr: LinearExpr, weight: f64) -> Self {
        Objective {
            sense,
            expr,
            weight,
        }
    }
}

/// Machine-readable structural intent attached to a model, consumed by the
/// deterministic constraint checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum Requirement {
    /// The model must enforce `|xi - xj| >= threshold`.
    AbsGe {
        xi: String,
        xj: String,
        threshold: f64,
    },
    /// At most `k` of the `linked` variables may be strictly positive,
    /// switched by the binary `selectors` (same length as `linked`).
    KWay {
        k: usize,
        selectors: Vec<String>,
        linked: Vec<String>,
    },
}

/// A complete optimization model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptModel {
    pub variables: Vec<VariableDecl>,
    pub constraints: Vec<Constraint>,
    pub objectives: Vec<Objective>,
    pub requirements: Vec<Requirement>,
}

impl OptModel {
    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn has_integrality(&self) -> bool {
        self.variables.iter().any(|v| v.kind.is_integral())
    }

    /// Collects every structural violation (never stops at the first).
    pub fn structural_violations(&self) -> Vec<String> {
        let mut errs = Vec::new();

        if self.variables.is_empty() {
            errs.push("model declares no variables".to_string());
        }
        match self.objectives.len() {
            0 => errs.push("model has no objective".to_string()),
            1 | 2 => {}
            n => errs.push(format!("objective count exceeds 2 (found {n})")),
        }

        let mut seen = std::collections::BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                errs.push(format!("duplicate variable {}", v.name));
            }
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                errs.push(format!(
                    "variable {} has lower bound {} above upper bound {}",
                    v.name, v.lower, v.upper
                ));
            }
            if v.kind == VarKind::Binary && (v.lower != 0.0 || v.upper != 1.0) {
                errs.push(format!("binary bound conflict on {}", v.name));
            }
        }

        let declared: std::collections::BTreeSet<&str> =
            self.variables.iter().map(|v| v.name.as_str()).collect();
        let check_expr = |owner: &str, expr: &LinearExpr, errs: &mut Vec<String>| {
            for (var, coeff) in expr.terms() {
                if !declared.contains(var) {
                    errs.push(format!("undeclared variable {var} in {owner}"));
                }
                if !coeff.is_finite() {
                    errs.push(format!("non-finite coefficient on {var} in {owner}"));
                }
            }
            if !expr.constant.is_finite() {
                errs.push(format!("non-finite constant in {owner}"));
            }
        };

        let mut names = std::collections::BTreeSet::new();
        for c in &self.constraints {
            if !names.insert(c.name.as_str()) {
                errs.push(format!("duplicate constraint {}", c.name));
            }
            check_expr(&format!("constraint {}", c.name), &c.expr, &mut errs);
            if !c.rhs.is_finite() {
                errs.push(format!("non-finite rhs in constraint {}", c.name));
            }
            if !c.is_normalized() {
                errs.push(format!("constraint {} not normalized", c.name));
            }
        }
        for (i, o) in self.objectives.iter().enumerate() {
            check_expr(&format!("objective {}", i + 1), &o.expr, &mut errs);
            if o.weight <= 0.0 || o.weight.is_nan() {
                errs.push(format!("objective {} weight must be positive", i + 1));
            }
        }

        for req in &self.requirements {
            match req {
                Requirement::AbsGe { xi, xj, threshold } => {
                    for v in [xi, xj] {
                        if !declared.contains(v.as_str()) {
                            errs.push(format!("undeclared variable {v} in abs_ge requirement"));
                        }
                    }
                    if xi == xj {
                        errs.push(format!("abs_ge requirement references {xi} on both sides"));
                    }
                    if *threshold < 0.0 || threshold.is_nan() {
                        errs.push("abs_ge threshold must be nonnegative".to_string());
                    }
                }
                Requirement::KWay {
                    selectors, linked, ..
                } => {
                    if selectors.len() != linked.len() {
                        errs.push(format!(
                            "kway requirement has {} selectors but {} linked variables",
                            selectors.len(),
                            linked.len()
                        ));
                    }
                    for s in selectors {
                        match self.variable(s) {
                            None => {
                                errs.push(format!("undeclared variable {s} in kway requirement"))
                            }
                            Some(decl) if decl.kind != VarKind::Binary => {
                                errs.push(format!("kway selector {s} is not binary"))
                            }
                            _ => {}
                        }
                    }
                    for l in linked {
                        if !declared.contains(l.as_str()) {
                            errs.push(format!("undeclared variable {l} in kway requirement"));
                        }
                    }
                }
            }
        }

        errs
    }
}

/// Structural well-formedness check: passes iff every type invariant holds
/// and the objective count is 1 or 2. The failure text lists every violation.
pub fn validate_structure(model: &OptModel) -> CheckReport {
    let violations = model.structural_violations();
    if violations.is_empty() {
        CheckReport::pass(CheckStage::Structure, CheckMode::Deterministic)
    } else {
        CheckReport::fail(
            CheckStage::Structure,
            CheckMode::Deterministic,
            violations.join("; "),
        )
    }
}
