//! Line-oriented parser for the `.optir` model grammar.

use super::{
    Constraint, ConstraintSense, LinearExpr, ModelError, Objective, ObjectiveSense, OptModel,
    Requirement, VarKind, VariableDecl,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Plus,
    Minus,
    Star,
    Colon,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Le,
    Ge,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eq => "`=`".into(),
        }
    }
}

struct Line {
    number: usize,
    toks: Vec<(usize, Tok)>, // (column, token)
    pos: usize,
}

impl Line {
    fn syntax(&self, message: impl Into<String>) -> ModelError {
        let column = self
            .toks
            .get(self.pos)
            .map(|(c, _)| *c)
            .unwrap_or_else(|| self.toks.last().map(|(c, _)| c + 1).unwrap_or(1));
        ModelError::Syntax {
            line: self.number,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ModelError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.syntax(format!("expected {what}, found {}", t.describe()))),
            None => Err(self.syntax(format!("expected {what}, found end of line"))),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ModelError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(t) => Err({
                self.pos -= 1;
                self.syntax(format!("expected {what}, found {}", t.describe()))
            }),
            None => Err(self.syntax(format!("expected {what}, found end of line"))),
        }
    }

    /// A number with optional leading sign. `allow_inf` admits the
    /// `inf`/`-inf` extended reals used in bound positions.
    fn expect_number(&mut self, what: &str, allow_inf: bool) -> Result<f64, ModelError> {
        let mut sign = 1.0;
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            sign = -1.0;
        } else if self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
        }
        match self.next() {
            Some(Tok::Num(n)) => Ok(sign * n),
            Some(Tok::Ident(s)) if allow_inf && s == "inf" => Ok(sign * f64::INFINITY),
            Some(t) => Err({
                self.pos -= 1;
                self.syntax(format!("expected {what}, found {}", t.describe()))
            }),
            None => Err(self.syntax(format!("expected {what}, found end of line"))),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }

    fn expect_end(&mut self) -> Result<(), ModelError> {
        if self.at_end() {
            Ok(())
        } else {
            let t = self.peek().unwrap().describe();
            Err(self.syntax(format!("unexpected {t} at end of statement")))
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn tokenize(line: &str, number: usize) -> Result<Line, ModelError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let col = i + 1;
        let c = chars[i];
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                i += 1;
            }
            '+' => {
                toks.push((col, Tok::Plus));
                i += 1;
            }
            '-' => {
                toks.push((col, Tok::Minus));
                i += 1;
            }
            '*' => {
                toks.push((col, Tok::Star));
                i += 1;
            }
            ':' => {
                toks.push((col, Tok::Colon));
                i += 1;
            }
            ',' => {
                toks.push((col, Tok::Comma));
                i += 1;
            }
            '[' => {
                toks.push((col, Tok::LBracket));
                i += 1;
            }
            ']' => {
                toks.push((col, Tok::RBracket));
                i += 1;
            }
            '(' => {
                toks.push((col, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((col, Tok::RParen));
                i += 1;
            }
            '<' | '>' => {
                if chars.get(i + 1) != Some(&'=') {
                    return Err(ModelError::Syntax {
                        line: number,
                        column: col,
                        message: format!("`{c}` must be followed by `=`"),
                    });
                }
                toks.push((col, if c == '<' { Tok::Le } else { Tok::Ge }));
                i += 2;
            }
            '=' => {
                toks.push((col, Tok::Eq));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // optional exponent
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse::<f64>().map_err(|_| ModelError::Syntax {
                    line: number,
                    column: col,
                    message: format!("malformed number `{text}`"),
                })?;
                toks.push((col, Tok::Num(value)));
            }
            c if is_ident_start(c) => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                toks.push((col, Tok::Ident(chars[start..i].iter().collect())));
            }
            other => {
                return Err(ModelError::Syntax {
                    line: number,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(Line {
        number,
        toks,
        pos: 0,
    })
}

/// Parses an expression up to (not including) a sense token or end of line.
fn parse_expr(line: &mut Line) -> Result<LinearExpr, ModelError> {
    let mut expr = LinearExpr::new();
    let mut sign = 1.0;
    let mut first = true;
    loop {
        match line.peek() {
            Some(Tok::Plus) if !first => {
                line.pos += 1;
                sign = 1.0;
            }
            Some(Tok::Minus) => {
                line.pos += 1;
                sign = -1.0;
            }
            Some(Tok::Plus) => {
                line.pos += 1;
                sign = 1.0;
            }
            _ => {}
        }
        match line.next() {
            Some(Tok::Num(n)) => {
                // `NUM * IDENT`, `NUM IDENT`, or a bare constant
                let coeff = sign * n;
                if line.peek() == Some(&Tok::Star) {
                    line.pos += 1;
                    let var = line.expect_ident("variable name after `*`")?;
                    expr.add_term(coeff, var);
                } else if matches!(line.peek(), Some(Tok::Ident(_))) {
                    let var = line.expect_ident("variable name")?;
                    expr.add_term(coeff, var);
                } else {
                    expr.constant += coeff;
                }
            }
            Some(Tok::Ident(v)) => {
                expr.add_term(sign, v);
            }
            Some(t) => {
                line.pos -= 1;
                return Err(line.syntax(format!("expected term, found {}", t.describe())));
            }
            None => return Err(line.syntax("expected term, found end of line")),
        }
        sign = 1.0;
        first = false;
        match line.peek() {
            Some(Tok::Plus) | Some(Tok::Minus) => continue,
            _ => break,
        }
    }
    Ok(expr)
}

fn parse_var(line: &mut Line) -> Result<VariableDecl, ModelError> {
    let name = line.expect_ident("variable name")?;
    let mut kind = VarKind::Continuous;
    if let Some(Tok::Ident(word)) = line.peek() {
        kind = match word.as_str() {
            "continuous" => VarKind::Continuous,
            "integer" => VarKind::Integer,
            "binary" => VarKind::Binary,
            other => {
                return Err(line.syntax(format!(
                    "unknown variable kind `{other}` (expected continuous, integer, or binary)"
                )))
            }
        };
        line.pos += 1;
    }
    let mut lower: Option<f64> = None;
    let mut upper: Option<f64> = None;
    while !line.at_end() {
        match line.next() {
            Some(Tok::Ge) => {
                if lower.replace(line.expect_number("lower bound", true)?).is_some() {
                    return Err(line.syntax("duplicate lower bound"));
                }
            }
            Some(Tok::Le) => {
                if upper.replace(line.expect_number("upper bound", true)?).is_some() {
                    return Err(line.syntax("duplicate upper bound"));
                }
            }
            Some(t) => {
                line.pos -= 1;
                return Err(line.syntax(format!("expected bound clause, found {}", t.describe())));
            }
            None => unreachable!(),
        }
    }
    let (default_lower, default_upper) = match kind {
        VarKind::Binary => (0.0, 1.0),
        _ => (0.0, f64::INFINITY),
    };
    Ok(VariableDecl {
        name,
        kind,
        lower: lower.unwrap_or(default_lower),
        upper: upper.unwrap_or(default_upper),
    })
}

fn parse_objective(line: &mut Line, sense: ObjectiveSense) -> Result<Objective, ModelError> {
    let mut weight = 1.0;
    if let Some(Tok::Ident(w)) = line.peek() {
        if w == "weight" {
            line.pos += 1;
            weight = line.expect_number("objective weight", false)?;
        }
    }
    let expr = parse_expr(line)?;
    line.expect_end()?;
    Ok(Objective::weighted(sense, expr, weight))
}

fn parse_constraint(line: &mut Line) -> Result<Constraint, ModelError> {
    let name = line.expect_ident("constraint name")?;
    line.expect(&Tok::Colon, "`:` after constraint name")?;
    let expr = parse_expr(line)?;
    let sense = match line.next() {
        Some(Tok::Le) => ConstraintSense::Le,
        Some(Tok::Ge) => ConstraintSense::Ge,
        Some(Tok::Eq) => ConstraintSense::Eq,
        Some(t) => {
            line.pos -= 1;
            return Err(line.syntax(format!("expected `<=`, `>=`, or `=`, found {}", t.describe())));
        }
        None => return Err(line.syntax("expected `<=`, `>=`, or `=`, found end of line")),
    };
    let rhs = line.expect_number("right-hand side", false)?;
    line.expect_end()?;
    Ok(Constraint::new(name, expr, sense, rhs))
}

fn parse_ident_list(line: &mut Line) -> Result<Vec<String>, ModelError> {
    line.expect(&Tok::LBracket, "`[`")?;
    let mut names = Vec::new();
    if line.peek() == Some(&Tok::RBracket) {
        line.pos += 1;
        return Ok(names);
    }
    loop {
        names.push(line.expect_ident("variable name")?);
        match line.next() {
            Some(Tok::Comma) => continue,
            Some(Tok::RBracket) => break,
            Some(t) => {
                line.pos -= 1;
                return Err(line.syntax(format!("expected `,` or `]`, found {}", t.describe())));
            }
            None => return Err(line.syntax("expected `,` or `]`, found end of line")),
        }
    }
    Ok(names)
}

fn parse_requirement(line: &mut Line) -> Result<Requirement, ModelError> {
    let which = line.expect_ident("requirement kind (abs_ge or kway)")?;
    line.expect(&Tok::LParen, "`(`")?;
    let req = match which.as_str() {
        "abs_ge" => {
            let xi = line.expect_ident("first variable")?;
            line.expect(&Tok::Comma, "`,`")?;
            let xj = line.expect_ident("second variable")?;
            line.expect(&Tok::Comma, "`,`")?;
            let threshold = line.expect_number("threshold", false)?;
            Requirement::AbsGe { xi, xj, threshold }
        }
        "kway" => {
            let k = line.expect_number("selection limit", false)?;
            if k < 0.0 || k.fract() != 0.0 {
                return Err(line.syntax("selection limit must be a nonnegative integer"));
            }
            line.expect(&Tok::Comma, "`,`")?;
            let selectors = parse_ident_list(line)?;
            line.expect(&Tok::Comma, "`,`")?;
            let linked = parse_ident_list(line)?;
            Requirement::KWay {
                k: k as usize,
                selectors,
                linked,
            }
        }
        other => {
            return Err(line.syntax(format!(
                "unknown requirement `{other}` (expected abs_ge or kway)"
            )))
        }
    };
    line.expect(&Tok::RParen, "`)`")?;
    line.expect_end()?;
    Ok(req)
}

/// Parses model source text. The returned model satisfies every structural
/// invariant; otherwise a location-bearing syntax error or a semantic error
/// listing all violations is returned.
pub fn parse_model(text: &str) -> Result<OptModel, ModelError> {
    let mut model = OptModel::default();
    for (idx, raw) in text.lines().enumerate() {
        let mut line = tokenize(raw, idx + 1)?;
        if line.at_end() {
            continue;
        }
        let head = line.expect_ident("statement keyword")?;
        match head.as_str() {
            "var" => {
                let decl = parse_var(&mut line)?;
                model.variables.push(decl);
            }
            "min" => model.objectives.push(parse_objective(&mut line, ObjectiveSense::Min)?),
            "max" => model.objectives.push(parse_objective(&mut line, ObjectiveSense::Max)?),
            "st" => model.constraints.push(parse_constraint(&mut line)?),
            "require" => model.requirements.push(parse_requirement(&mut line)?),
            other => {
                line.pos -= 1;
                return Err(line.syntax(format!(
                    "unknown statement `{other}` (expected var, min, max, st, or require)"
                )));
            }
        }
    }
    let violations = model.structural_violations();
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Semantic {
            message: violations.join("; "),
        })
    }
}
