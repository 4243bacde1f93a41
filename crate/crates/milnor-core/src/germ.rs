//! Polynomial map germs: a small text format, its parser, pretty-printer,
//! evaluator, and exact Jacobians via forward-mode jets.
//!
//! A germ file declares variables on the first line and lists the component
//! polynomials separated by `;`:
//!
//! ```text
//! vars x y z
//! x^2*z + y^3 - z;
//! x
//! ```
//!
//! Coefficients are integers or rationals (`3/4`), exponents nonnegative
//! integers, `#` starts a comment. The grammar has no division or
//! transcendental functions: derivatives stay exact.

use crate::jet::{powi_f64, Jet1};
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// A node of a polynomial expression over the declared variables.
///
/// Constants are nonnegative rationals; negative values are represented by
/// the explicit `Neg` node, which is what the parser produces for `-`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    /// Variable by index into the germ's `vars`.
    Var(usize),
    /// Rational constant `num/den`, `den >= 1`.
    Const { num: u64, den: u64 },
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Neg(Box<Expression>),
    /// Integer power with exponent >= 0.
    Pow(Box<Expression>, u32),
}

impl Expression {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expression::Var(i) => x[*i],
            Expression::Const { num, den } => *num as f64 / *den as f64,
            Expression::Add(a, b) => a.eval(x) + b.eval(x),
            Expression::Sub(a, b) => a.eval(x) - b.eval(x),
            Expression::Mul(a, b) => a.eval(x) * b.eval(x),
            Expression::Neg(a) => -a.eval(x),
            Expression::Pow(a, e) => powi_f64(a.eval(x), *e),
        }
    }

    pub fn eval_jet(&self, x: &[f64]) -> Jet1 {
        let n = x.len();
        match self {
            Expression::Var(i) => Jet1::variable(x[*i], *i, n),
            Expression::Const { num, den } => Jet1::constant(*num as f64 / *den as f64, n),
            Expression::Add(a, b) => &a.eval_jet(x) + &b.eval_jet(x),
            Expression::Sub(a, b) => &a.eval_jet(x) - &b.eval_jet(x),
            Expression::Mul(a, b) => &a.eval_jet(x) * &b.eval_jet(x),
            Expression::Neg(a) => -&a.eval_jet(x),
            Expression::Pow(a, e) => a.eval_jet(x).powi(*e),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Expression::Var(i) => Some(*i),
            Expression::Const { .. } => None,
            Expression::Add(a, b) | Expression::Sub(a, b) | Expression::Mul(a, b) => {
                a.max_var().into_iter().chain(b.max_var()).max()
            }
            Expression::Neg(a) => a.max_var(),
            Expression::Pow(a, _) => a.max_var(),
        }
    }
}

/// A polynomial map `R^n -> R^k` considered near the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MapGerm {
    pub name: String,
    pub vars: Vec<String>,
    pub components: Vec<Expression>,
}

impl MapGerm {
    /// Source dimension.
    pub fn n(&self) -> usize {
        self.vars.len()
    }

    /// Target dimension.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Evaluate `f(x)`. Deterministic: same bits in, same bits out.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>, GermError> {
        if x.len() != self.n() {
            return Err(GermError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let xs = x.as_slice();
        Ok(DVector::from_iterator(
            self.k(),
            self.components.iter().map(|c| c.eval(xs)),
        ))
    }

    /// Jacobian `Df(x)` (k x n), each row a jet gradient. No finite differences.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, GermError> {
        if x.len() != self.n() {
            return Err(GermError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let xs = x.as_slice();
        let mut jac = DMatrix::zeros(self.k(), self.n());
        for (i, comp) in self.components.iter().enumerate() {
            let jet = comp.eval_jet(xs);
            for j in 0..self.n() {
                jac[(i, j)] = jet.gradient[j];
            }
        }
        Ok(jac)
    }

    /// Evaluate and differentiate in one pass.
    pub fn evaluate_with_jacobian(
        &self,
        x: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>), GermError> {
        if x.len() != self.n() {
            return Err(GermError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let xs = x.as_slice();
        let mut value = DVector::zeros(self.k());
        let mut jac = DMatrix::zeros(self.k(), self.n());
        for (i, comp) in self.components.iter().enumerate() {
            let jet = comp.eval_jet(xs);
            value[i] = jet.value;
            for j in 0..self.n() {
                jac[(i, j)] = jet.gradient[j];
            }
        }
        Ok((value, jac))
    }

    /// Heuristic sanity warnings; never an error.
    ///
    /// Flags `f(0) != 0`, target/source dimension oddities, a full-rank
    /// differential at the origin (the origin is then a regular point and
    /// the germ is a degenerate study case), and components whose
    /// differential vanishes identically on a probe set.
    pub fn validate(&self) -> Vec<ParseDiagnostic> {
        let mut out = Vec::new();
        let n = self.n();
        let k = self.k();
        if n < 2 {
            out.push(ParseDiagnostic::warning(
                0..0,
                format!("source dimension n = {n} < 2"),
            ));
        }
        if k < 2 {
            out.push(ParseDiagnostic::warning(
                0..0,
                format!("target dimension k = {k} < 2"),
            ));
        }
        if k > n {
            out.push(ParseDiagnostic::warning(
                0..0,
                format!("target dimension k = {k} exceeds source dimension n = {n}"),
            ));
        }
        let origin = DVector::zeros(n);
        if let Ok(f0) = self.evaluate(&origin) {
            if f0.iter().any(|v| *v != 0.0) {
                out.push(ParseDiagnostic::warning(
                    0..0,
                    format!(
                        "f(0) = {:?} is not the origin; germ convention expects f(0) = 0",
                        f0.as_slice()
                    ),
                ));
            }
        }
        if let Ok(j0) = self.jacobian(&origin) {
            let rank = crate::linalg::factorize(&j0, 1e-10)
                .map(|f| f.rank)
                .unwrap_or(0);
            if rank == k && k > 0 {
                out.push(ParseDiagnostic::warning(
                    0..0,
                    format!("rank(Df(0)) = {k} = k; origin is a regular point"),
                ));
            }
        }
        // Probe a few fixed points for identically-zero differentials.
        let probes: [Vec<f64>; 3] = [
            (0..n).map(|i| 0.37 + 0.11 * i as f64).collect(),
            (0..n).map(|i| -0.52 + 0.23 * i as f64).collect(),
            (0..n).map(|i| 0.081 * (i as f64 + 1.0)).collect(),
        ];
        for (ci, comp) in self.components.iter().enumerate() {
            let all_zero = probes
                .iter()
                .all(|p| comp.eval_jet(p).gradient.iter().all(|g| *g == 0.0));
            if all_zero {
                out.push(ParseDiagnostic::warning(
                    0..0,
                    format!(
                        "component {} has identically zero differential (constant component)",
                        ci + 1
                    ),
                ));
            }
        }
        out
    }
}

impl fmt::Display for MapGerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_germ(self))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GermError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Severity of a parse or validation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A diagnostic anchored to a byte span of the source text.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ParseDiagnostic {
    pub span: (usize, usize),
    pub message: String,
    pub severity: Severity,
}

impl ParseDiagnostic {
    fn error(span: std::ops::Range<usize>, message: String) -> Self {
        ParseDiagnostic {
            span: (span.start, span.end),
            message,
            severity: Severity::Error,
        }
    }

    fn warning(span: std::ops::Range<usize>, message: String) -> Self {
        ParseDiagnostic {
            span: (span.start, span.end),
            message,
            severity: Severity::Warning,
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} [{}..{}]: {}", self.span.0, self.span.1, self.message)
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Uint(u64),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    Semi,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    span: std::ops::Range<usize>,
}

fn lex(src: &str, base: usize) -> Result<Vec<Spanned>, ParseDiagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = base + i;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '+' => {
                out.push(Spanned { tok: Tok::Plus, span: start..start + 1 });
                i += 1;
            }
            '-' => {
                out.push(Spanned { tok: Tok::Minus, span: start..start + 1 });
                i += 1;
            }
            '*' => {
                out.push(Spanned { tok: Tok::Star, span: start..start + 1 });
                i += 1;
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, span: start..start + 1 });
                i += 1;
            }
            '/' => {
                out.push(Spanned { tok: Tok::Slash, span: start..start + 1 });
                i += 1;
            }
            ';' => {
                out.push(Spanned { tok: Tok::Semi, span: start..start + 1 });
                i += 1;
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, span: start..start + 1 });
                i += 1;
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, span: start..start + 1 });
                i += 1;
            }
            '0'..='9' => {
                let s = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    return Err(ParseDiagnostic::error(
                        base + s..base + i + 1,
                        "decimal literals are not supported; use rationals like 3/10".into(),
                    ));
                }
                let text = &src[s..i];
                let value: u64 = text.parse().map_err(|_| {
                    ParseDiagnostic::error(
                        base + s..base + i,
                        format!("integer literal '{text}' out of range"),
                    )
                })?;
                out.push(Spanned { tok: Tok::Uint(value), span: base + s..base + i });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let s = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(src[s..i].to_string()),
                    span: base + s..base + i,
                });
            }
            other => {
                return Err(ParseDiagnostic::error(
                    start..start + other.len_utf8(),
                    format!("unexpected character '{other}'"),
                ));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    vars: &'a [String],
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn span(&self) -> std::ops::Range<usize> {
        self.toks
            .get(self.pos)
            .map(|s| s.span.clone())
            .unwrap_or(self.end..self.end)
    }

    fn bump(&mut self) -> Option<&Spanned> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expression, ParseDiagnostic> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := factor ('*' factor)*
    fn term(&mut self) -> Result<Expression, ParseDiagnostic> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.bump();
            let rhs = self.factor()?;
            lhs = Expression::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // factor := atom ('^' UINT)?
    fn factor(&mut self) -> Result<Expression, ParseDiagnostic> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let span = self.span();
            match self.peek().cloned() {
                Some(Tok::Uint(e)) => {
                    self.bump();
                    // catch `x^2/3` so the message names the real mistake
                    if let Some(Tok::Slash) = self.peek() {
                        let slash = self.span();
                        if matches!(self.toks.get(self.pos + 1).map(|s| &s.tok), Some(Tok::Uint(_))) {
                            return Err(ParseDiagnostic::error(
                                span.start..slash.end + 1,
                                "exponent must be a nonnegative integer, not a rational".into(),
                            ));
                        }
                        return Err(ParseDiagnostic::error(slash, "unexpected '/'".into()));
                    }
                    let e = u32::try_from(e).map_err(|_| {
                        ParseDiagnostic::error(span.clone(), format!("exponent {e} out of range"))
                    })?;
                    Ok(Expression::Pow(Box::new(base), e))
                }
                Some(Tok::Minus) => Err(ParseDiagnostic::error(
                    span,
                    "exponent must be a nonnegative integer".into(),
                )),
                _ => Err(ParseDiagnostic::error(
                    span,
                    "expected a nonnegative integer exponent after '^'".into(),
                )),
            }
        } else {
            Ok(base)
        }
    }

    // atom := IDENT | RATIONAL | '(' expr ')' | '-' atom
    fn atom(&mut self) -> Result<Expression, ParseDiagnostic> {
        let span = self.span();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.bump();
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expression::Var(i)),
                    None => Err(ParseDiagnostic::error(
                        span,
                        format!("undeclared variable '{name}'"),
                    )),
                }
            }
            Some(Tok::Uint(num)) => {
                self.bump();
                if let Some(Tok::Slash) = self.peek() {
                    self.bump();
                    let dspan = self.span();
                    match self.peek().cloned() {
                        Some(Tok::Uint(den)) if den > 0 => {
                            self.bump();
                            Ok(Expression::Const { num, den })
                        }
                        Some(Tok::Uint(_)) => Err(ParseDiagnostic::error(
                            dspan,
                            "rational denominator must be positive".into(),
                        )),
                        _ => Err(ParseDiagnostic::error(
                            dspan,
                            "expected a positive integer denominator after '/'".into(),
                        )),
                    }
                } else {
                    Ok(Expression::Const { num, den: 1 })
                }
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.bump();
                        Ok(inner)
                    }
                    _ => Err(ParseDiagnostic::error(self.span(), "expected ')'".into())),
                }
            }
            Some(Tok::Minus) => {
                self.bump();
                let inner = self.atom()?;
                Ok(Expression::Neg(Box::new(inner)))
            }
            Some(other) => Err(ParseDiagnostic::error(
                span,
                format!("unexpected token {other:?}"),
            )),
            None => Err(ParseDiagnostic::error(span, "unexpected end of input".into())),
        }
    }
}

/// Parse a germ from source text. Errors carry byte spans into `source`.
pub fn parse_germ(source: &str) -> Result<MapGerm, Vec<ParseDiagnostic>> {
    // First non-blank, non-comment line must be the `vars` declaration.
    let mut offset = 0;
    let mut header: Option<(usize, &str)> = None;
    for line in source.split_inclusive('\n') {
        let stripped = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        if stripped.trim().is_empty() {
            offset += line.len();
            continue;
        }
        header = Some((offset, stripped));
        offset += line.len();
        break;
    }
    let (hstart, hline) = match header {
        Some(h) => h,
        None => {
            return Err(vec![ParseDiagnostic::error(
                0..0,
                "empty source: expected a 'vars' declaration".into(),
            )])
        }
    };
    let mut words = hline.split_whitespace();
    if words.next() != Some("vars") {
        return Err(vec![ParseDiagnostic::error(
            hstart..hstart + hline.trim_end().len(),
            "first line must be 'vars IDENT+'".into(),
        )]);
    }
    let mut vars: Vec<String> = Vec::new();
    let mut diags: Vec<ParseDiagnostic> = Vec::new();
    for w in words {
        if !w.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
            || !w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            diags.push(ParseDiagnostic::error(
                hstart..hstart + hline.len(),
                format!("invalid variable name '{w}'"),
            ));
            continue;
        }
        if vars.iter().any(|v| v == w) {
            diags.push(ParseDiagnostic::error(
                hstart..hstart + hline.len(),
                format!("duplicate variable '{w}'"),
            ));
            continue;
        }
        vars.push(w.to_string());
    }
    if vars.is_empty() {
        diags.push(ParseDiagnostic::error(
            hstart..hstart + hline.len(),
            "'vars' declares no variables".into(),
        ));
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let body = &source[offset..];
    let toks = match lex(body, offset) {
        Ok(t) => t,
        Err(d) => return Err(vec![d]),
    };
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        vars: &vars,
        end: source.len(),
    };
    let mut components = Vec::new();
    loop {
        if parser.peek().is_none() {
            break;
        }
        match parser.expr() {
            Ok(e) => components.push(e),
            Err(d) => return Err(vec![d]),
        }
        match parser.peek() {
            Some(Tok::Semi) => {
                parser.bump();
            }
            None => break,
            Some(_) => {
                return Err(vec![ParseDiagnostic::error(
                    parser.span(),
                    "expected ';' or end of input after expression".into(),
                )])
            }
        }
    }
    if components.is_empty() {
        return Err(vec![ParseDiagnostic::error(
            offset..source.len(),
            "germ has no component expressions".into(),
        )]);
    }
    for c in &components {
        if let Some(m) = c.max_var() {
            debug_assert!(m < vars.len());
        }
    }
    Ok(MapGerm {
        name: "germ".to_string(),
        vars,
        components,
    })
}

// ---------------------------------------------------------------------------
// Pretty-printer
// ---------------------------------------------------------------------------

// Precedence positions that decide parenthesization. The printer emits
// text that re-parses to a structurally identical tree, which makes the
// format -> parse round trip evaluation-exact.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    Expr = 0,
    Term = 1,
    Factor = 2,
    Atom = 3,
}

fn node_level(e: &Expression) -> Level {
    match e {
        Expression::Add(..) | Expression::Sub(..) => Level::Expr,
        Expression::Mul(..) => Level::Term,
        Expression::Pow(..) => Level::Factor,
        Expression::Var(_) | Expression::Const { .. } | Expression::Neg(_) => Level::Atom,
    }
}

fn fmt_named(e: &Expression, vars: &[String], min: Level, out: &mut String) {
    let lvl = node_level(e);
    let parens = (lvl as u8) < (min as u8);
    if parens {
        out.push('(');
    }
    match e {
        Expression::Var(i) => out.push_str(&vars[*i]),
        Expression::Const { num, den } => {
            if *den == 1 {
                out.push_str(&num.to_string());
            } else {
                out.push_str(&format!("{num}/{den}"));
            }
        }
        Expression::Add(a, b) => {
            fmt_named(a, vars, Level::Expr, out);
            out.push_str(" + ");
            // right operand of a left-associative chain must bind tighter
            fmt_named(b, vars, Level::Term, out);
        }
        Expression::Sub(a, b) => {
            fmt_named(a, vars, Level::Expr, out);
            out.push_str(" - ");
            fmt_named(b, vars, Level::Term, out);
        }
        Expression::Mul(a, b) => {
            fmt_named(a, vars, Level::Term, out);
            out.push('*');
            fmt_named(b, vars, Level::Factor, out);
        }
        Expression::Neg(a) => {
            out.push('-');
            fmt_named(a, vars, Level::Atom, out);
        }
        Expression::Pow(a, e) => {
            fmt_named(a, vars, Level::Atom, out);
            out.push('^');
            out.push_str(&e.to_string());
        }
    }
    if parens {
        out.push(')');
    }
}

/// Render a germ back to source text; `parse_germ(format_germ(g))` is
/// structurally identical to `g`.
pub fn format_germ(germ: &MapGerm) -> String {
    let mut out = String::from("vars");
    for v in &germ.vars {
        out.push(' ');
        out.push_str(v);
    }
    out.push('\n');
    for (i, c) in germ.components.iter().enumerate() {
        if i > 0 {
            out.push_str(";\n");
        }
        fmt_named(c, &germ.vars, Level::Expr, &mut out);
    }
    out.push('\n');
    out
}
