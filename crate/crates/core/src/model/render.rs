//! Canonical renderer for the `.optir` grammar. Output reparses to a
//! structurally equal model: sections in variables/objectives/constraints/
//! requirements order, terms sorted by variable name, numbers in shortest
//! round-trippable form, default bounds omitted.

use super::{LinearExpr, ObjectiveSense, OptModel, Requirement, VarKind};
use std::fmt::Write;

fn push_number(out: &mut String, value: f64) {
    if value == f64::INFINITY {
        out.push_str("inf");
    } else if value == f64::NEG_INFINITY {
        out.push_str("-inf");
    } else {
        // Display for f64 is the shortest representation that reparses
        // to the same bits
        let _ = write!(out, "{value}");
    }
}

fn push_expr(out: &mut String, expr: &LinearExpr) {
    let mut first = true;
    for (var, coeff) in expr.terms() {
        if first {
            if coeff < 0.0 {
                out.push('-');
            }
        } else if coeff < 0.0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        push_number(out, coeff.abs());
        out.push(' ');
        out.push_str(var);
        first = false;
    }
    if expr.constant != 0.0 || first {
        if first {
            push_number(out, expr.constant);
        } else if expr.constant < 0.0 {
            out.push_str(" - ");
            push_number(out, -expr.constant);
        } else {
            out.push_str(" + ");
            push_number(out, expr.constant);
        }
    }
}

fn push_ident_list(out: &mut String, names: &[String]) {
    out.push('[');
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(n);
    }
    out.push(']');
}

/// Renders a model to canonical `.optir` source.
pub fn render_model(model: &OptModel) -> String {
    let mut out = String::new();

    for v in &model.variables {
        out.push_str("var ");
        out.push_str(&v.name);
        out.push(' ');
        let _ = write!(out, "{}", v.kind);
        let (default_lower, default_upper) = match v.kind {
            VarKind::Binary => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        };
        if v.lower != default_lower {
            out.push_str(" >= ");
            push_number(&mut out, v.lower);
        }
        if v.upper != default_upper {
            out.push_str(" <= ");
            push_number(&mut out, v.upper);
        }
        out.push('\n');
    }

    for o in &model.objectives {
        out.push_str(match o.sense {
            ObjectiveSense::Min => "min ",
            ObjectiveSense::Max => "max ",
        });
        if o.weight != 1.0 {
            out.push_str("weight ");
            push_number(&mut out, o.weight);
            out.push(' ');
        }
        push_expr(&mut out, &o.expr);
        out.push('\n');
    }

    for c in &model.constraints {
        out.push_str("st ");
        out.push_str(&c.name);
        out.push_str(": ");
        push_expr(&mut out, &c.expr);
        let _ = write!(out, " {} ", c.sense);
        push_number(&mut out, c.rhs);
        out.push('\n');
    }

    for r in &model.requirements {
        match r {
            Requirement::AbsGe { xi, xj, threshold } => {
                out.push_str("require abs_ge(");
                out.push_str(xi);
                out.push_str(", ");
                out.push_str(xj);
                out.push_str(", ");
                push_number(&mut out, *threshold);
                out.push_str(")\n");
            }
            Requirement::KWay {
                k,
                selectors,
                linked,
            } => {
                let _ = write!(out, "require kway({k}, ");
                push_ident_list(&mut out, selectors);
                out.push_str(", ");
                push_ident_list(&mut out, linked);
                out.push_str(")\n");
            }
        }
    }

    out
}
