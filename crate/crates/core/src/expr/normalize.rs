//! Expansion into a sum of monomials over atoms (symbols, function calls,
//! inverses of sums), collection of like monomials, and extraction of the
//! common monomial content.
//!
//! Used wherever syntactic cancellation is not enough, e.g. the closed-form
//! zero dynamics where the lifted field must cancel against the drift.

use std::collections::BTreeMap;

use super::{simplify, Expr, Number};

/// Largest positive power of a sum that is expanded; larger ones stay atoms.
const MAX_EXPANDED_POWER: i32 = 8;

#[derive(Debug, Clone, PartialEq)]
struct Mono {
    /// atom key -> (atom, exponent); exponents are never zero.
    factors: BTreeMap<String, (Expr, i32)>,
}

impl Mono {
    fn one() -> Self {
        Self { factors: BTreeMap::new() }
    }

    fn atom(e: Expr, k: i32) -> Self {
        let mut m = Self::one();
        m.factors.insert(atom_key(&e), (e, k));
        m
    }

    fn key(&self) -> String {
        self.factors.iter().map(|(k, (_, e))| format!("{k}^{e};")).collect()
    }

    fn degree(&self) -> i32 {
        self.factors.values().map(|(_, k)| k).sum()
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut out = self.clone();
        for (key, (atom, k)) in &other.factors {
            let entry = out.factors.entry(key.clone()).or_insert((atom.clone(), 0));
            entry.1 += k;
            if entry.1 == 0 {
                out.factors.remove(key);
            }
        }
        out
    }

    fn powi(&self, k: i32) -> Mono {
        Mono { factors: self.factors.iter().map(|(key, (a, e))| (key.clone(), (a.clone(), e * k))).collect() }
    }
}

fn atom_key(e: &Expr) -> String {
    let rank = match e {
        Expr::Var(_) => '0',
        Expr::Func(..) => '1',
        _ => '2',
    };
    format!("{rank}{e}")
}

#[derive(Debug, Clone, Default)]
struct Poly {
    terms: BTreeMap<String, (Mono, Number)>,
}

impl Poly {
    fn constant(c: Number) -> Self {
        let mut p = Poly::default();
        p.insert(Mono::one(), c);
        p
    }

    fn monomial(m: Mono) -> Self {
        let mut p = Poly::default();
        p.insert(m, Number::int(1));
        p
    }

    fn insert(&mut self, m: Mono, c: Number) {
        if c.is_zero() {
            return;
        }
        let key = m.key();
        match self.terms.get_mut(&key) {
            Some(slot) => {
                slot.1 = slot.1.add(c);
                if slot.1.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, (m, c));
            }
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        for (_, (m, c)) in other.terms {
            self.insert(m, c);
        }
        self
    }

    fn scale(self, c: Number) -> Poly {
        let mut out = Poly::default();
        for (_, (m, k)) in self.terms {
            out.insert(m, k.mul(c));
        }
        out
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in self.terms.values() {
            for (mb, cb) in other.terms.values() {
                out.insert(ma.mul(mb), ca.mul(*cb));
            }
        }
        out
    }

    fn single(&self) -> Option<(&Mono, Number)> {
        if self.terms.len() == 1 {
            self.terms.values().next().map(|(m, c)| (m, *c))
        } else {
            None
        }
    }

    /// `Some(c)` when `self == c * other` with both non-empty.
    fn ratio_to(&self, other: &Poly) -> Option<Number> {
        if self.terms.is_empty() || self.terms.len() != other.terms.len() {
            return None;
        }
        let mut ratio: Option<Number> = None;
        for (key, (_, c)) in &self.terms {
            let (_, d) = other.terms.get(key)?;
            let r = c.mul(d.recip()?);
            match ratio {
                None => ratio = Some(r),
                Some(prev) if prev == r => {}
                Some(_) => return None,
            }
        }
        ratio
    }

    fn inverse(&self) -> Poly {
        if let Some((m, c)) = self.single() {
            if let Some(ic) = c.recip() {
                let mut p = Poly::default();
                p.insert(m.powi(-1), ic);
                return p;
            }
        }
        Poly::monomial(Mono::atom(to_expr(self), -1))
    }

    fn powi(&self, k: i32) -> Poly {
        if k < 0 {
            return self.inverse().powi(-k);
        }
        if let Some((m, c)) = self.single() {
            if let Some(ck) = c.powi(k) {
                let mut p = Poly::default();
                p.insert(m.powi(k), ck);
                return p;
            }
        }
        if k > MAX_EXPANDED_POWER {
            return Poly::monomial(Mono::atom(to_expr(self), k));
        }
        let mut acc = Poly::constant(Number::int(1));
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }
}

fn from_expr(e: &Expr) -> Poly {
    match e {
        Expr::Const(c) => Poly::constant(*c),
        Expr::Var(_) => Poly::monomial(Mono::atom(e.clone(), 1)),
        Expr::Neg(a) => from_expr(a).scale(Number::int(-1)),
        Expr::Add(items) => items.iter().fold(Poly::default(), |acc, i| acc.add(from_expr(i))),
        Expr::Mul(items) => items.iter().fold(Poly::constant(Number::int(1)), |acc, i| acc.mul(&from_expr(i))),
        Expr::Div(a, b) => {
            let (num, den) = (from_expr(a), from_expr(b));
            match num.ratio_to(&den) {
                Some(c) => Poly::constant(c),
                None => num.mul(&den.inverse()),
            }
        }
        Expr::Pow(b, k) => from_expr(b).powi(*k),
        Expr::Func(f, a) => {
            let arg = to_expr(&from_expr(a));
            match simplify(&Expr::Func(*f, Box::new(arg))) {
                Expr::Const(c) => Poly::constant(c),
                call => Poly::monomial(Mono::atom(call, 1)),
            }
        }
    }
}

fn term_expr(m: &Mono, c: Number) -> Expr {
    let mut num = Vec::new();
    let mut den = Vec::new();
    if !c.is_one() {
        num.push(Expr::Const(c));
    }
    for (atom, k) in m.factors.values() {
        match k.signum() {
            1 => num.push(atom.clone().powi(*k)),
            -1 => den.push(atom.clone().powi(-*k)),
            _ => {}
        }
    }
    let num = Expr::product(num);
    if den.is_empty() {
        num
    } else {
        num.div(Expr::product(den))
    }
}

fn integer_gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

fn to_expr(p: &Poly) -> Expr {
    let mut terms: Vec<(&Mono, Number)> = p.terms.values().map(|(m, c)| (m, *c)).collect();
    terms.sort_by(|(ma, _), (mb, _)| ma.degree().cmp(&mb.degree()).then_with(|| ma.key().cmp(&mb.key())));
    match terms.len() {
        0 => return Expr::zero(),
        1 => return simplify(&term_expr(terms[0].0, terms[0].1)),
        _ => {}
    }

    // Common monomial content: atoms present in every term with positive exponent.
    let mut content = Mono::one();
    for (key, (atom, k)) in &terms[0].0.factors {
        let min = terms.iter().map(|(m, _)| m.factors.get(key).map_or(0, |(_, e)| *e)).min().unwrap_or(0).min(*k);
        if min > 0 {
            content.factors.insert(key.clone(), (atom.clone(), min));
        }
    }

    let ints: Option<Vec<i64>> = terms.iter().map(|(_, c)| c.as_integer()).collect();
    let mut coef = ints.map(|v| v.into_iter().fold(0, integer_gcd)).filter(|g| *g > 1).unwrap_or(1);
    if terms[0].1.is_negative() {
        coef = -coef;
    }

    let strip = content.powi(-1);
    let inv_coef = Number::int(coef).recip().expect("nonzero");
    let inner: Vec<Expr> = terms.iter().map(|(m, c)| term_expr(&m.mul(&strip), c.mul(inv_coef))).collect();

    let mut items = Vec::new();
    if coef != 1 {
        items.push(Expr::int(coef));
    }
    items.extend(content.factors.values().map(|(a, k)| a.clone().powi(*k)));
    items.push(Expr::Add(inner));
    simplify(&Expr::product(items))
}

/// Expands `e`, collects like monomials and factors out the common
/// monomial content.
pub fn normalize(e: &Expr) -> Expr {
    to_expr(&from_expr(e))
}
