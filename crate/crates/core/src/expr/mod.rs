//! Symbolic scalar expressions over named states, one input symbol and time.
//!
//! Expressions are immutable trees. [`parse_expr`] reads the text grammar,
//! [`diff`] differentiates exactly, [`simplify`] applies local rewrite rules,
//! [`normalize`] expands products and collects like monomials, and
//! [`Expr::eval`] evaluates in double precision.

mod diff;
mod eval;
mod normalize;
mod parse;
mod print;
mod simplify;
mod zero;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

pub use diff::{diff, jacobian};
pub use eval::{eval_all, Point};
pub use normalize::normalize;
pub use parse::parse_expr;
pub use simplify::simplify;
pub use zero::{is_zero, is_zero_default, Halton, SampleBox, ZeroVerdict};

/// Numeric literal: exact rational where the source was an integer or a
/// ratio of integers, double precision otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Rational(Rational64),
    Float(f64),
}

#[allow(clippy::should_implement_trait)]
impl Number {
    pub fn int(v: i64) -> Self {
        Number::Rational(Rational64::from_integer(v))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(r) => rational_to_f64(r),
            Number::Float(f) => f,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(f) => f == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(r) => r == Rational64::from_integer(1),
            Number::Float(f) => f == 1.0,
        }
    }

    /// Exact `-1`; a float `-1.0` is kept as an explicit coefficient.
    pub fn is_minus_one(self) -> bool {
        matches!(self, Number::Rational(r) if r == Rational64::from_integer(-1))
    }

    pub fn is_negative(self) -> bool {
        match self {
            Number::Rational(r) => *r.numer() < 0,
            Number::Float(f) => f < 0.0 || (f == 0.0 && f.is_sign_negative()),
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Number::Rational(r) => r
                .numer()
                .checked_neg()
                .map(|n| Number::Rational(Rational64::new_raw(n, *r.denom())))
                .unwrap_or(Number::Float(-rational_to_f64(r))),
            Number::Float(f) => Number::Float(-f),
        }
    }

    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => {
                checked(a, b, |a, b| num_traits::CheckedAdd::checked_add(&a, &b))
                    .map(Number::Rational)
                    .unwrap_or_else(|| Number::Float(self.to_f64() + other.to_f64()))
            }
            _ => Number::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Self) -> Self {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => {
                checked(a, b, |a, b| num_traits::CheckedMul::checked_mul(&a, &b))
                    .map(Number::Rational)
                    .unwrap_or_else(|| Number::Float(self.to_f64() * other.to_f64()))
            }
            _ => Number::Float(self.to_f64() * other.to_f64()),
        }
    }

    /// Reciprocal; `None` for zero.
    pub fn recip(self) -> Option<Self> {
        match self {
            Number::Rational(r) if r.is_zero() => None,
            Number::Rational(r) => Some(Number::Rational(r.recip())),
            Number::Float(0.0) => None,
            Number::Float(f) => Some(Number::Float(1.0 / f)),
        }
    }

    pub fn powi(self, k: i32) -> Option<Self> {
        match self {
            Number::Rational(r) => {
                if r.is_zero() && k < 0 {
                    return None;
                }
                let mut acc = Rational64::from_integer(1);
                let base = if k < 0 { r.recip() } else { r };
                for _ in 0..k.unsigned_abs() {
                    match num_traits::CheckedMul::checked_mul(&acc, &base) {
                        Some(v) => acc = v,
                        None => return Some(Number::Float(rational_to_f64(r).powi(k))),
                    }
                }
                Some(Number::Rational(acc))
            }
            Number::Float(f) if f == 0.0 && k < 0 => None,
            Number::Float(f) => Some(Number::Float(f.powi(k))),
        }
    }

    /// Exact non-negative integer value, if this is one.
    pub fn as_integer(self) -> Option<i64> {
        match self {
            Number::Rational(r) if r.is_integer() => Some(*r.numer()),
            _ => None,
        }
    }
}

fn checked<F>(a: Rational64, b: Rational64, op: F) -> Option<Rational64>
where
    F: FnOnce(Rational64, Rational64) -> Option<Rational64>,
{
    // Rational64's checked ops can still panic on intermediate overflow in
    // reduction for extreme inputs; keep the magnitudes bounded.
    const LIMIT: i64 = 1 << 31;
    let small = |r: &Rational64| r.numer().abs() < LIMIT && *r.denom() < LIMIT;
    if small(&a) && small(&b) {
        op(a, b)
    } else {
        None
    }
}

fn rational_to_f64(r: Rational64) -> f64 {
    if r.is_integer() {
        *r.numer() as f64
    } else {
        r.to_f64().unwrap_or_else(|| *r.numer() as f64 / *r.denom() as f64)
    }
}

/// Elementary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Number),
    Var(String),
    Neg(Box<Expr>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn int(v: i64) -> Self {
        Expr::Const(Number::int(v))
    }

    pub fn float(v: f64) -> Self {
        Expr::Const(Number::Float(v))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn neg(self) -> Self {
        Expr::Neg(Box::new(self))
    }

    pub fn div(self, den: Expr) -> Self {
        Expr::Div(Box::new(self), Box::new(den))
    }

    pub fn powi(self, k: i32) -> Self {
        Expr::Pow(Box::new(self), k)
    }

    pub fn apply(f: Func, arg: Expr) -> Self {
        Expr::Func(f, Box::new(arg))
    }

    pub fn sum(items: Vec<Expr>) -> Self {
        match items.len() {
            0 => Expr::zero(),
            1 => items.into_iter().next().unwrap(),
            _ => Expr::Add(items),
        }
    }

    pub fn product(items: Vec<Expr>) -> Self {
        match items.len() {
            0 => Expr::one(),
            1 => items.into_iter().next().unwrap(),
            _ => Expr::Mul(items),
        }
    }

    pub fn as_const(&self) -> Option<Number> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True for the literal constant zero.
    pub fn is_literal_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    /// Free symbols, sorted.
    pub fn free_symbols(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_symbols(&mut out);
        out.into_iter().collect()
    }

    fn collect_symbols(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.collect_symbols(out),
            Expr::Add(items) | Expr::Mul(items) => items.iter().for_each(|i| i.collect_symbols(out)),
            Expr::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == name,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.contains_symbol(name),
            Expr::Add(items) | Expr::Mul(items) => items.iter().any(|i| i.contains_symbol(name)),
            Expr::Div(a, b) => a.contains_symbol(name) || b.contains_symbol(name),
        }
    }

    /// Replace every occurrence of `name` by `with`. The result is not simplified.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(name.to_string(), with.clone());
        self.substitute_all(&map)
    }

    pub fn substitute_all(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute_all(map))),
            Expr::Add(items) => Expr::Add(items.iter().map(|i| i.substitute_all(map)).collect()),
            Expr::Mul(items) => Expr::Mul(items.iter().map(|i| i.substitute_all(map)).collect()),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute_all(map)), Box::new(b.substitute_all(map))),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.substitute_all(map)), *k),
            Expr::Func(f, a) => Expr::Func(*f, Box::new(a.substitute_all(map))),
        }
    }

    /// Every subtree, this node included, in pre-order.
    pub fn subexpressions(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.walk(&mut out);
        out
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        out.push(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.walk(out),
            Expr::Add(items) | Expr::Mul(items) => items.iter().for_each(|i| i.walk(out)),
            Expr::Div(a, b) => {
                a.walk(out);
                b.walk(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_text(self))
    }
}

/// Formats a list of expressions as `[e1, e2, ...]`.
pub fn format_list(items: &[Expr]) -> String {
    let parts: Vec<String> = items.iter().map(|e| e.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Declared identifiers: the ordered states, the input symbol and time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    pub states: Vec<String>,
    pub input: Option<String>,
    pub time: Option<String>,
}

impl SymbolTable {
    pub fn new(states: Vec<String>, input: Option<String>, time: Option<String>) -> Self {
        Self { states, input, time }
    }

    /// Table declaring only the given names as states.
    pub fn with_states<S: AsRef<str>>(states: &[S]) -> Self {
        Self { states: states.iter().map(|s| s.as_ref().to_string()).collect(), input: None, time: None }
    }

    /// Table declaring only the time symbol `t`.
    pub fn time_only() -> Self {
        Self { states: Vec::new(), input: None, time: Some("t".into()) }
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.states.iter().any(|s| s == name)
            || self.input.as_deref() == Some(name)
            || self.time.as_deref() == Some(name)
    }
}
