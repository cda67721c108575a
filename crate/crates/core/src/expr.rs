//! A small expression language over grid coordinates.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! var   := 'x1' .. 'x{2n}' | 'y1' .. 'y{n}'      (y_i is x_{n+i})
//! func  := 'sin' | 'cos' | 'exp'
//! ```
//!
//! Expressions evaluate on plain coordinates and on Taylor jets, so exact
//! complex Hessians of manufactured data come for free.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::jet::{JetSpace, TaylorJet};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn parse_error(col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        message: format!("column {}: {}", col + 1, msg.into()),
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part: 1e-3, 2.5E+4
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
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| parse_error(start, format!("bad number `{s}`")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(parse_error(i, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    n: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(c, _)| *c).unwrap_or(self.len)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.toks.get(self.pos).cloned().map(|(_, t)| t) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(parse_error(self.col(), "expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        if !self.eat('(') {
                            return Err(parse_error(
                                self.col(),
                                format!("expected `(` after `{name}`"),
                            ));
                        }
                        let arg = Box::new(self.expr()?);
                        if !self.eat(')') {
                            return Err(parse_error(self.col(), "expected `)`"));
                        }
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            _ => Expr::Exp(arg),
                        })
                    }
                    _ => self.variable(&name, col),
                }
            }
            Some(Tok::Op(c)) => Err(parse_error(col, format!("unexpected `{c}`"))),
            None => Err(parse_error(col, "unexpected end of expression")),
        }
    }

    fn variable(&self, name: &str, col: usize) -> Result<Expr> {
        let (head, digits) = name.split_at(1);
        let k: usize = digits
            .parse()
            .map_err(|_| parse_error(col, format!("unknown identifier `{name}`")))?;
        let limit = if head == "x" { 2 * self.n } else { self.n };
        if (head != "x" && head != "y") || k == 0 || k > limit {
            return Err(parse_error(
                col,
                format!("unknown identifier `{name}` for n = {}", self.n),
            ));
        }
        Ok(Expr::Var(if head == "x" { k - 1 } else { self.n + k - 1 }))
    }
}

impl Expr {
    /// Parses `src` for complex dimension `n`.
    pub fn parse(src: &str, n: usize) -> Result<Self> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            n,
            len: src.chars().count(),
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(parse_error(p.col(), "trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(a) => x[*a],
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let e = b.eval(x);
                if e.fract() == 0.0 && e.abs() < 64.0 {
                    a.eval(x).powi(e as i32)
                } else {
                    a.eval(x).powf(e)
                }
            }
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Exp(e) => e.eval(x).exp(),
        }
    }

    /// Evaluates on jets of the real coordinates.
    pub fn eval_jet(&self, x: &[TaylorJet]) -> TaylorJet {
        let space = x[0].space();
        match self {
            Expr::Num(v) => TaylorJet::real(space, *v),
            Expr::Var(a) => x[*a].clone(),
            Expr::Neg(e) => -&e.eval_jet(x),
            Expr::Add(a, b) => &a.eval_jet(x) + &b.eval_jet(x),
            Expr::Sub(a, b) => &a.eval_jet(x) - &b.eval_jet(x),
            Expr::Mul(a, b) => &a.eval_jet(x) * &b.eval_jet(x),
            Expr::Div(a, b) => &a.eval_jet(x) * &b.eval_jet(x).recip(),
            Expr::Pow(a, b) => {
                let base = a.eval_jet(x);
                match b.as_constant() {
                    Some(e) if e.fract() == 0.0 && (0.0..64.0).contains(&e) => base.powi(e as u32),
                    Some(e) if e.fract() == 0.0 && (-64.0..0.0).contains(&e) => {
                        base.recip().powi((-e) as u32)
                    }
                    _ => (&b.eval_jet(x) * &base.ln()).exp(),
                }
            }
            Expr::Sin(e) => e.eval_jet(x).sin(),
            Expr::Cos(e) => e.eval_jet(x).cos(),
            Expr::Exp(e) => e.eval_jet(x).exp(),
        }
    }

    /// The value when the expression has no variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.has_vars() {
            None
        } else {
            Some(self.eval(&[]))
        }
    }

    fn has_vars(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(e) | Expr::Sin(e) | Expr::Cos(e) | Expr::Exp(e) => e.has_vars(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.has_vars() || b.has_vars(),
        }
    }
}

/// Exact derivatives of expressions through second-order jets.
pub struct ExactDerivatives {
    space: Arc<JetSpace>,
}

impl ExactDerivatives {
    pub fn new(n: usize) -> Self {
        ExactDerivatives {
            space: JetSpace::new(n, 2),
        }
    }

    fn jet_at(&self, e: &Expr, x: &[f64]) -> TaylorJet {
        let coords: Vec<TaylorJet> = (0..2 * self.space.n())
            .map(|a| TaylorJet::real_coordinate(&self.space, a, x))
            .collect();
        e.eval_jet(&coords)
    }

    /// `∂_i∂̄_j u` at `x`.
    pub fn complex_hessian(&self, e: &Expr, x: &[f64]) -> HermitianMatrix {
        let n = self.space.n();
        let j = self.jet_at(e, x);
        HermitianMatrix::from_upper_fn(n, |a, b| {
            let mut holo = vec![0u8; n];
            let mut anti = vec![0u8; n];
            holo[a] += 1;
            anti[b] += 1;
            j.derivative_at_base(&holo, &anti).expect("order 2")
        })
    }

    /// `∂_i u` at `x`.
    pub fn gradient(&self, e: &Expr, x: &[f64]) -> Vec<Complex64> {
        let n = self.space.n();
        let j = self.jet_at(e, x);
        (0..n)
            .map(|a| {
                let mut holo = vec![0u8; n];
                holo[a] = 1;
                j.derivative_at_base(&holo, &vec![0u8; n]).expect("order 1")
            })
            .collect()
    }
}
