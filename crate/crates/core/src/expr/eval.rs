use std::collections::BTreeMap;

use super::{Expr, Func};
use crate::error::{Error, Result};

/// Symbol bindings for numeric evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point {
    values: BTreeMap<String, f64>,
}

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `names[i]` to `values[i]`.
    pub fn from_slices<S: AsRef<str>>(names: &[S], values: &[f64]) -> Self {
        let mut p = Self::new();
        for (n, v) in names.iter().zip(values) {
            p.set(n.as_ref(), *v);
        }
        p
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl Expr {
    /// Double-precision value at `p`.
    pub fn eval(&self, p: &Point) -> Result<f64> {
        match self {
            Expr::Const(c) => Ok(c.to_f64()),
            Expr::Var(v) => p.get(v).ok_or_else(|| Error::Unbound(v.clone())),
            Expr::Neg(a) => Ok(-a.eval(p)?),
            Expr::Add(items) => {
                let mut acc = 0.0;
                for (i, item) in items.iter().enumerate() {
                    let v = item.eval(p)?;
                    acc = if i == 0 { v } else { acc + v };
                }
                Ok(acc)
            }
            Expr::Mul(items) => {
                let mut acc = 1.0;
                for (i, item) in items.iter().enumerate() {
                    let v = item.eval(p)?;
                    acc = if i == 0 { v } else { acc * v };
                }
                Ok(acc)
            }
            Expr::Div(a, b) => {
                let den = b.eval(p)?;
                if den == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                Ok(a.eval(p)? / den)
            }
            Expr::Pow(b, k) => {
                let base = b.eval(p)?;
                if base == 0.0 && *k < 0 {
                    return Err(self.domain("zero raised to a negative power"));
                }
                Ok(base.powi(*k))
            }
            Expr::Func(f, a) => {
                let x = a.eval(p)?;
                match f {
                    Func::Exp => Ok(x.exp()),
                    Func::Ln if x <= 0.0 => Err(self.domain("logarithm of a non-positive value")),
                    Func::Ln => Ok(x.ln()),
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Tan => Ok(x.tan()),
                    Func::Sqrt if x < 0.0 => Err(self.domain("square root of a negative value")),
                    Func::Sqrt => Ok(x.sqrt()),
                }
            }
        }
    }

    fn domain(&self, reason: &str) -> Error {
        Error::Domain { subexpr: self.to_string(), reason: reason.to_string() }
    }
}

/// Evaluates each expression of `v` at `p`.
pub fn eval_all(v: &[Expr], p: &Point) -> Result<Vec<f64>> {
    v.iter().map(|e| e.eval(p)).collect()
}
