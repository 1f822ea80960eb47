//! Bound expressions for interval endpoints that depend on parent values.
//!
//! Grammar: numbers, names (parents or graph constants), `+ - * /`, unary
//! minus, parentheses, `min(..)`, `max(..)` and `sum(family, lo, hi)` which
//! adds the variables `family{lo}` .. `family{hi}` (inclusive).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::domain::VarIndex;
use crate::interval::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("unknown variable family `{0}`")]
    UnknownFamily(String),
    #[error("family member `{family}{index}` does not exist")]
    MissingMember { family: String, index: i64 },
    #[error("`{0}` is excluded (EXC) and cannot be used in an expression")]
    ExcludedReference(String),
    #[error("`{0}` is not numeric")]
    NotNumeric(String),
    #[error("sum index bound is not an integer: {0}")]
    NonIntegerIndex(Interval),
    #[error("sum index range too wide to evaluate")]
    IndexRangeTooWide,
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("expression is unresolved")]
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Name(String),
    Var(VarIndex),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Sum {
        family: String,
        members: BTreeMap<i64, VarIndex>,
        lo: Box<Expr>,
        hi: Box<Expr>,
    },
}

/// Supplies variable values (or ranges) during evaluation.
pub trait Env {
    fn lookup(&self, v: VarIndex) -> Result<Interval, ExprError>;
}

impl<F> Env for F
where
    F: Fn(VarIndex) -> Result<Interval, ExprError>,
{
    fn lookup(&self, v: VarIndex) -> Result<Interval, ExprError> {
        self(v)
    }
}

/// Name resolution context.
pub trait Resolver {
    fn variable(&self, name: &str) -> Option<VarIndex>;
    fn constant(&self, name: &str) -> Option<f64>;
    /// Members `family{i}` keyed by `i`; `None` when no such family exists.
    fn family(&self, prefix: &str) -> Option<BTreeMap<i64, VarIndex>>;
    /// Names left as-is for a later resolution pass instead of failing.
    fn defer(&self, _name: &str) -> bool {
        false
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    /// Replaces names with variable indices or constant values.
    pub fn resolve(&self, r: &dyn Resolver) -> Result<Expr, ExprError> {
        Ok(match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(v) => Expr::Var(*v),
            Expr::Name(n) => {
                if let Some(v) = r.variable(n) {
                    Expr::Var(v)
                } else if let Some(c) = r.constant(n) {
                    Expr::Num(c)
                } else if r.defer(n) {
                    Expr::Name(n.clone())
                } else {
                    return Err(ExprError::UnknownName(n.clone()));
                }
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.resolve(r)?)),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.resolve(r)?), Box::new(b.resolve(r)?)),
            Expr::Min(xs) => Expr::Min(xs.iter().map(|x| x.resolve(r)).collect::<Result<_, _>>()?),
            Expr::Max(xs) => Expr::Max(xs.iter().map(|x| x.resolve(r)).collect::<Result<_, _>>()?),
            Expr::Sum { family, lo, hi, .. } => Expr::Sum {
                family: family.clone(),
                members: r
                    .family(family)
                    .ok_or_else(|| ExprError::UnknownFamily(family.clone()))?,
                lo: Box::new(lo.resolve(r)?),
                hi: Box::new(hi.resolve(r)?),
            },
        })
    }

    /// Every variable the expression may read, including all family members.
    pub fn references(&self) -> Vec<VarIndex> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Names of constants or variables still unresolved.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Name(n) = e {
                out.push(n.clone());
            }
        });
        out
    }

    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) => a.walk(f),
            Expr::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Min(xs) | Expr::Max(xs) => xs.iter().for_each(|x| x.walk(f)),
            Expr::Sum { lo, hi, .. } => {
                lo.walk(f);
                hi.walk(f);
            }
            Expr::Num(_) | Expr::Name(_) | Expr::Var(_) => {}
        }
    }

    fn collect_refs(&self, out: &mut Vec<VarIndex>) {
        self.walk(&mut |e| match e {
            Expr::Var(v) => out.push(*v),
            Expr::Sum { members, .. } => out.extend(members.values().copied()),
            _ => {}
        });
    }

    /// Range of the expression over the ranges supplied by `env`.
    ///
    /// The result is the exact value when every lookup is a point, and a sound
    /// enclosure otherwise (exact for expressions monotone in each variable
    /// that read every variable once, such as sums of parents).
    pub fn eval(&self, env: &dyn Env) -> Result<Interval, ExprError> {
        match self {
            Expr::Num(x) => Ok(Interval::point(*x)),
            Expr::Name(_) => Err(ExprError::Unresolved),
            Expr::Var(v) => env.lookup(*v),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => a.checked_div(b).ok_or(ExprError::DivisionByZero),
                }
            }
            Expr::Min(xs) | Expr::Max(xs) => {
                let is_min = matches!(self, Expr::Min(_));
                let mut acc: Option<Interval> = None;
                for x in xs {
                    let v = x.eval(env)?;
                    acc = Some(match acc {
                        None => v,
                        Some(a) if is_min => a.min(v),
                        Some(a) => a.max(v),
                    });
                }
                acc.ok_or(ExprError::Unresolved)
            }
            Expr::Sum { family, members, lo, hi } => {
                let (lo, hi) = (integer_range(lo.eval(env)?)?, integer_range(hi.eval(env)?)?);
                if (lo.1 - lo.0 + 1).saturating_mul(hi.1 - hi.0 + 1) > 10_000 {
                    return Err(ExprError::IndexRangeTooWide);
                }
                let mut acc: Option<Interval> = None;
                for a in lo.0..=lo.1 {
                    for b in hi.0..=hi.1 {
                        let mut s = Interval::point(0.0);
                        for i in a..=b {
                            let v = members.get(&i).ok_or_else(|| ExprError::MissingMember {
                                family: family.clone(),
                                index: i,
                            })?;
                            s = s + env.lookup(*v)?;
                        }
                        acc = Some(acc.map_or(s, |x| x.hull(s)));
                    }
                }
                acc.ok_or(ExprError::Unresolved)
            }
        }
    }

    /// Point evaluation for environments that only return points.
    pub fn eval_point(&self, env: &dyn Env) -> Result<f64, ExprError> {
        let v = self.eval(env)?;
        Ok(v.lo)
    }
}

fn integer_range(iv: Interval) -> Result<(i64, i64), ExprError> {
    let (a, b) = (iv.lo.ceil(), iv.hi.floor());
    if !a.is_finite() || !b.is_finite() || (iv.is_point() && iv.lo.fract() != 0.0) {
        return Err(ExprError::NonIntegerIndex(iv));
    }
    Ok((a as i64, b as i64))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Name(n) => f.write_str(n),
            Expr::Var(v) => write!(f, "#{}", v.0),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Bin(op, a, b) => {
                let c = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({a} {c} {b})")
            }
            Expr::Min(xs) | Expr::Max(xs) => {
                f.write_str(if matches!(self, Expr::Min(_)) { "min(" } else { "max(" })?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            Expr::Sum { family, lo, hi, .. } => write!(f, "sum({family}, {lo}, {hi})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.ident();
                if !self.eat(b'(') {
                    return Ok(Expr::Name(name));
                }
                match name.as_str() {
                    "min" | "max" => {
                        let mut args = vec![self.expr()?];
                        while self.eat(b',') {
                            args.push(self.expr()?);
                        }
                        self.expect(b')')?;
                        Ok(if name == "min" { Expr::Min(args) } else { Expr::Max(args) })
                    }
                    "sum" => {
                        if !matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || c == b'_') {
                            return Err(self.err("expected family name"));
                        }
                        let family = self.ident();
                        self.expect(b',')?;
                        let lo = self.expr()?;
                        self.expect(b',')?;
                        let hi = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Sum {
                            family,
                            members: BTreeMap::new(),
                            lo: Box::new(lo),
                            hi: Box::new(hi),
                        })
                    }
                    _ => Err(self.err(&format!("unknown function `{name}`"))),
                }
            }
            _ => Err(self.err("expected a number, name or `(`")),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || matches!(self.src[self.pos], b'.' | b'e' | b'E'))
        {
            if matches!(self.src[self.pos], b'e' | b'E')
                && matches!(self.src.get(self.pos + 1), Some(b'+' | b'-'))
            {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        s.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax { pos: start, msg: format!("bad number `{s}`") })
    }
}
