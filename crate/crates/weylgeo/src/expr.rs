//! Analytic scalar fields on boxes in R^n, given by a small expression language.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' integer)? | '-' factor
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := 'exp' | 'ln' | 'sin' | 'cos'
//! ident  := 'x' digit+
//! ```
//!
//! Numbers are plain decimals (no exponent notation); `^` takes an unsigned
//! integer literal. Variables are 1-based: `x1` is the first coordinate.
//! Fields support exact symbolic differentiation with light simplification
//! (constant folding and the 0/1 identities), enough to keep derivative
//! trees from exploding but deliberately nothing clever.

use std::fmt;

use thiserror::Error;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character `{ch}` at offset {offset}")]
    UnexpectedChar { ch: char, offset: usize },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("malformed number at offset {offset}")]
    BadNumber { offset: usize },
    #[error("unknown name `{name}` at offset {offset}: expected exp, ln, sin, cos, or x<k>")]
    UnknownName { name: String, offset: usize },
    #[error("variable x{var} out of range at offset {offset}: field has {nvars} variables")]
    VarOutOfRange {
        var: usize,
        nvars: usize,
        offset: usize,
    },
    #[error("exponent at offset {offset} must be an unsigned integer literal")]
    BadExponent { offset: usize },
    #[error("expected {expected} at offset {offset}")]
    Expected {
        expected: &'static str,
        offset: usize,
    },
    #[error("trailing input at offset {offset}")]
    Trailing { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("logarithm of a non-positive value at {point:?}")]
    LnDomain { point: Vec<f64> },
    #[error("division by zero at {point:?}")]
    DivByZero { point: Vec<f64> },
    #[error("field over {expected} variables evaluated at a point of dimension {got}")]
    Arity { expected: usize, got: usize },
}

/// Expression tree. Variables are stored 0-based internally.
#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

use Expr::*;

// Smart constructors: every tree in the crate is built through these, so
// printed output round-trips and derivative trees stay small. Constant folds
// are guarded on finite results.

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) if (x + y).is_finite() => Const(x + y),
        (Const(z), b) if z == 0.0 => b,
        (a, Const(z)) if z == 0.0 => a,
        (a, b) => Add(a.into(), b.into()),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) if (x - y).is_finite() => Const(x - y),
        (a, Const(z)) if z == 0.0 => a,
        (Const(z), b) if z == 0.0 => neg(b),
        (a, b) => Sub(a.into(), b.into()),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) if (x * y).is_finite() => Const(x * y),
        (Const(z), _) | (_, Const(z)) if z == 0.0 => Const(0.0),
        (Const(o), b) if o == 1.0 => b,
        (a, Const(o)) if o == 1.0 => a,
        (a, b) => Mul(a.into(), b.into()),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Const(x), Const(y)) if y != 0.0 && (x / y).is_finite() => Const(x / y),
        (a, Const(o)) if o == 1.0 => a,
        (a, b) => Div(a.into(), b.into()),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Const(x) => Const(-x),
        Neg(inner) => *inner,
        a => Neg(a.into()),
    }
}

fn pow(a: Expr, k: u32) -> Expr {
    match (a, k) {
        (_, 0) => Const(1.0),
        (a, 1) => a,
        (Const(x), k) if x.powi(k as i32).is_finite() => Const(x.powi(k as i32)),
        (a, k) => Pow(a.into(), k),
    }
}

fn exp_(a: Expr) -> Expr {
    match a {
        Const(x) if x.exp().is_finite() => Const(x.exp()),
        a => Exp(a.into()),
    }
}

fn ln_(a: Expr) -> Expr {
    match a {
        Const(x) if x > 0.0 && x.ln().is_finite() => Const(x.ln()),
        a => Ln(a.into()),
    }
}

fn sin_(a: Expr) -> Expr {
    match a {
        Const(x) if x.sin().is_finite() => Const(x.sin()),
        a => Sin(a.into()),
    }
}

fn cos_(a: Expr) -> Expr {
    match a {
        Const(x) if x.cos().is_finite() => Const(x.cos()),
        a => Cos(a.into()),
    }
}

/// A scalar field on R^nvars.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Expr,
    nvars: usize,
}

impl ScalarField {
    /// Parse `src` as a field over `nvars` variables `x1..x{nvars}`.
    pub fn parse(src: &str, nvars: usize) -> Result<Self> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            nvars,
        };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(ParseError::Trailing { offset: p.pos }.into());
        }
        Ok(ScalarField { expr, nvars })
    }

    pub fn constant(value: f64, nvars: usize) -> Self {
        ScalarField {
            expr: Const(value),
            nvars,
        }
    }

    pub fn zero(nvars: usize) -> Self {
        Self::constant(0.0, nvars)
    }

    /// Coordinate function `x{var}` (1-based).
    pub fn coordinate(var: usize, nvars: usize) -> Self {
        assert!(var >= 1 && var <= nvars, "coordinate index out of range");
        ScalarField {
            expr: Var(var - 1),
            nvars,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(EvalError::Arity {
                expected: self.nvars,
                got: x.len(),
            }
            .into());
        }
        match eval_expr(&self.expr, x) {
            Ok(v) => Ok(v),
            Err(EvalAbort::Ln) => Err(EvalError::LnDomain { point: x.to_vec() }.into()),
            Err(EvalAbort::Div) => Err(EvalError::DivByZero { point: x.to_vec() }.into()),
        }
    }

    /// Exact partial derivative with respect to `x{var}` (1-based).
    ///
    /// Panics if `var` is 0 or exceeds `nvars`; a derivative request outside
    /// the chart is a programming error, not a data error.
    pub fn diff(&self, var: usize) -> ScalarField {
        assert!(
            var >= 1 && var <= self.nvars,
            "derivative variable x{var} out of range for {} variables",
            self.nvars
        );
        ScalarField {
            expr: diff_expr(&self.expr, var - 1),
            nvars: self.nvars,
        }
    }

    /// Does the expression mention `x{var}` (1-based) syntactically?
    pub fn depends_on(&self, var: usize) -> bool {
        assert!(var >= 1 && var <= self.nvars);
        mentions(&self.expr, var - 1)
    }

    /// Structurally the constant zero (up to the simplifier, not semantically).
    pub fn is_zero(&self) -> bool {
        self.expr == Const(0.0)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(&self.expr, 0, f)
    }
}

enum EvalAbort {
    Ln,
    Div,
}

fn eval_expr(e: &Expr, x: &[f64]) -> std::result::Result<f64, EvalAbort> {
    Ok(match e {
        Const(c) => *c,
        Var(i) => x[*i],
        Add(a, b) => eval_expr(a, x)? + eval_expr(b, x)?,
        Sub(a, b) => eval_expr(a, x)? - eval_expr(b, x)?,
        Mul(a, b) => eval_expr(a, x)? * eval_expr(b, x)?,
        Div(a, b) => {
            let d = eval_expr(b, x)?;
            if d == 0.0 {
                return Err(EvalAbort::Div);
            }
            eval_expr(a, x)? / d
        }
        Neg(a) => -eval_expr(a, x)?,
        Pow(a, k) => eval_expr(a, x)?.powi(*k as i32),
        Exp(a) => eval_expr(a, x)?.exp(),
        Ln(a) => {
            let v = eval_expr(a, x)?;
            if v <= 0.0 {
                return Err(EvalAbort::Ln);
            }
            v.ln()
        }
        Sin(a) => eval_expr(a, x)?.sin(),
        Cos(a) => eval_expr(a, x)?.cos(),
    })
}

fn diff_expr(e: &Expr, v: usize) -> Expr {
    match e {
        Const(_) => Const(0.0),
        Var(i) => Const(if *i == v { 1.0 } else { 0.0 }),
        Add(a, b) => add(diff_expr(a, v), diff_expr(b, v)),
        Sub(a, b) => sub(diff_expr(a, v), diff_expr(b, v)),
        Mul(a, b) => add(
            mul(diff_expr(a, v), (**b).clone()),
            mul((**a).clone(), diff_expr(b, v)),
        ),
        Div(a, b) => div(
            sub(
                mul(diff_expr(a, v), (**b).clone()),
                mul((**a).clone(), diff_expr(b, v)),
            ),
            pow((**b).clone(), 2),
        ),
        Neg(a) => neg(diff_expr(a, v)),
        Pow(a, k) => mul(
            mul(Const(f64::from(*k)), pow((**a).clone(), k - 1)),
            diff_expr(a, v),
        ),
        Exp(a) => mul(exp_((**a).clone()), diff_expr(a, v)),
        Ln(a) => div(diff_expr(a, v), (**a).clone()),
        Sin(a) => mul(cos_((**a).clone()), diff_expr(a, v)),
        Cos(a) => neg(mul(sin_((**a).clone()), diff_expr(a, v))),
    }
}

fn mentions(e: &Expr, v: usize) -> bool {
    match e {
        Const(_) => false,
        Var(i) => *i == v,
        Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => mentions(a, v) || mentions(b, v),
        Neg(a) | Pow(a, _) | Exp(a) | Ln(a) | Sin(a) | Cos(a) => mentions(a, v),
    }
}

// Printer: minimal parentheses by precedence. Left-associative operators
// print the right child one level tighter, so `a-(b+c)` and `a*(b/c)`
// keep their trees across a parse round-trip.

fn prec(e: &Expr) -> u8 {
    match e {
        Add(..) | Sub(..) => 1,
        Mul(..) | Div(..) => 2,
        Neg(..) => 3,
        Const(c) if *c < 0.0 => 3,
        Pow(..) => 4,
        _ => 5,
    }
}

fn write_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let parens = prec(e) < min;
    if parens {
        write!(f, "(")?;
    }
    match e {
        Const(c) => write!(f, "{c}")?,
        Var(i) => write!(f, "x{}", i + 1)?,
        Add(a, b) => {
            write_prec(a, 1, f)?;
            write!(f, "+")?;
            write_prec(b, 2, f)?;
        }
        Sub(a, b) => {
            write_prec(a, 1, f)?;
            write!(f, "-")?;
            write_prec(b, 2, f)?;
        }
        Mul(a, b) => {
            write_prec(a, 2, f)?;
            write!(f, "*")?;
            write_prec(b, 3, f)?;
        }
        Div(a, b) => {
            write_prec(a, 2, f)?;
            write!(f, "/")?;
            write_prec(b, 3, f)?;
        }
        Neg(a) => {
            write!(f, "-")?;
            write_prec(a, 3, f)?;
        }
        Pow(a, k) => {
            write_prec(a, 5, f)?;
            write!(f, "^{k}")?;
        }
        Exp(a) => {
            write!(f, "exp(")?;
            write_prec(a, 0, f)?;
            write!(f, ")")?;
        }
        Ln(a) => {
            write!(f, "ln(")?;
            write_prec(a, 0, f)?;
            write!(f, ")")?;
        }
        Sin(a) => {
            write!(f, "sin(")?;
            write_prec(a, 0, f)?;
            write!(f, ")")?;
        }
        Cos(a) => {
            write!(f, "cos(")?;
            write_prec(a, 0, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    e = add(e, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    e = sub(e, self.term()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut e = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    e = mul(e, self.factor()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    e = div(e, self.factor()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn factor(&mut self) -> std::result::Result<Expr, ParseError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(self.factor()?));
        }
        let a = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.exponent()?;
            return Ok(pow(a, k));
        }
        Ok(a)
    }

    fn atom(&mut self) -> std::result::Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(ParseError::UnexpectedEnd),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(e)
                } else if self.pos >= self.src.len() {
                    Err(ParseError::UnexpectedEnd)
                } else {
                    Err(ParseError::Expected {
                        expected: "`)`",
                        offset: self.pos,
                    })
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            Some(c) => Err(ParseError::UnexpectedChar {
                ch: c as char,
                offset: self.pos,
            }),
        }
    }

    fn number(&mut self) -> std::result::Result<Expr, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if !text.bytes().any(|c| c.is_ascii_digit()) {
            return Err(ParseError::BadNumber { offset: start });
        }
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Const(v)),
            _ => Err(ParseError::BadNumber { offset: start }),
        }
    }

    fn name(&mut self) -> std::result::Result<Expr, ParseError> {
        let start = self.pos;
        // Variable: 'x' immediately followed by digits.
        if self.peek() == Some(b'x')
            && self
                .src
                .get(self.pos + 1)
                .is_some_and(|c| c.is_ascii_digit())
        {
            self.pos += 1;
            let dstart = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let digits = std::str::from_utf8(&self.src[dstart..self.pos]).expect("ascii");
            let var: usize = digits
                .parse()
                .map_err(|_| ParseError::BadNumber { offset: dstart })?;
            if var == 0 || var > self.nvars {
                return Err(ParseError::VarOutOfRange {
                    var,
                    nvars: self.nvars,
                    offset: start,
                });
            }
            return Ok(Var(var - 1));
        }
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .to_string();
        let ctor: fn(Expr) -> Expr = match name.as_str() {
            "exp" => exp_,
            "ln" => ln_,
            "sin" => sin_,
            "cos" => cos_,
            _ => {
                return Err(ParseError::UnknownName {
                    name,
                    offset: start,
                })
            }
        };
        self.skip_ws();
        if self.peek() != Some(b'(') {
            return Err(ParseError::Expected {
                expected: "`(` after function name",
                offset: self.pos,
            });
        }
        self.pos += 1;
        let arg = self.expr()?;
        self.skip_ws();
        if self.peek() != Some(b')') {
            return if self.pos >= self.src.len() {
                Err(ParseError::UnexpectedEnd)
            } else {
                Err(ParseError::Expected {
                    expected: "`)`",
                    offset: self.pos,
                })
            };
        }
        self.pos += 1;
        Ok(ctor(arg))
    }

    fn exponent(&mut self) -> std::result::Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ParseError::BadExponent { offset: start });
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| ParseError::BadExponent { offset: start })
    }
}
