//! Local rewriting: constant folding, 0/1 identities, flattening, and
//! collection of syntactically identical terms and factors. Not a canonical
//! form; see [`super::normalize`] for expansion.

use num_rational::Rational64;
use num_traits::Signed;

use super::{Expr, Func, Number};

const MAX_PASSES: usize = 32;

/// Simplifies `e` to a fixpoint of the rewrite rules.
pub fn simplify(e: &Expr) -> Expr {
    let mut cur = pass(e);
    for _ in 0..MAX_PASSES {
        let next = pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn pass(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => negate(pass(a)),
        Expr::Add(items) => build_add(items.iter().map(pass).collect()),
        Expr::Mul(items) => build_mul(items),
        Expr::Div(a, b) => build_div(pass(a), pass(b)),
        Expr::Pow(b, k) => build_pow(pass(b), *k),
        Expr::Func(f, a) => build_func(*f, pass(a)),
    }
}

/// Negation of an already simplified expression.
pub(super) fn negate(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(c.neg()),
        Expr::Neg(x) => *x,
        Expr::Add(items) => build_add(items.into_iter().map(negate).collect()),
        Expr::Mul(mut items) => {
            match items.first().and_then(Expr::as_const) {
                Some(c) => {
                    let nc = c.neg();
                    if nc.is_one() {
                        items.remove(0);
                    } else {
                        items[0] = Expr::Const(nc);
                    }
                }
                None => items.insert(0, Expr::int(-1)),
            }
            finish_mul(items)
        }
        Expr::Div(n, d) => Expr::Div(Box::new(negate(*n)), d),
        other => Expr::Neg(Box::new(other)),
    }
}

/// Whether a simplified numerator carries an explicit minus sign.
fn leading_minus(e: &Expr) -> bool {
    match e {
        Expr::Neg(_) => true,
        Expr::Const(c) => c.is_negative(),
        Expr::Mul(items) => items.first().and_then(Expr::as_const).is_some_and(Number::is_negative),
        _ => false,
    }
}

/// Splits a simplified term into its numeric coefficient and the rest.
fn split_coefficient(term: &Expr) -> (Number, Option<Expr>) {
    match term {
        Expr::Const(c) => (*c, None),
        Expr::Neg(x) => {
            let (c, rest) = split_coefficient(x);
            (c.neg(), rest)
        }
        Expr::Mul(items) => match items.first().and_then(Expr::as_const) {
            Some(c) => (c, Some(Expr::product(items[1..].to_vec()))),
            None => (Number::int(1), Some(term.clone())),
        },
        _ => (Number::int(1), Some(term.clone())),
    }
}

fn scale(coef: Number, rest: Expr) -> Expr {
    if coef.is_one() {
        rest
    } else if coef.is_minus_one() {
        negate(rest)
    } else {
        let mut items = vec![Expr::Const(coef)];
        match rest {
            Expr::Mul(inner) => items.extend(inner),
            other => items.push(other),
        }
        Expr::Mul(items)
    }
}

fn build_add(items: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(items.len());
    for item in items {
        match item {
            Expr::Add(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }

    // (coefficient, rest) groups in first-occurrence order; `None` is the constant slot.
    let mut groups: Vec<(Number, Option<Expr>)> = Vec::new();
    for term in &flat {
        let (c, rest) = split_coefficient(term);
        match groups.iter_mut().find(|(_, r)| *r == rest) {
            Some(slot) => slot.0 = slot.0.add(c),
            None => groups.push((c, rest)),
        }
    }

    // A sum of floats that cancels stays a float.
    let float_zero = groups.iter().any(|(c, _)| matches!(c, Number::Float(f) if *f == 0.0));
    let out: Vec<Expr> = groups
        .into_iter()
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, rest)| match rest {
            None => Expr::Const(c),
            Some(r) => scale(c, r),
        })
        .collect();
    if out.is_empty() && float_zero {
        return Expr::float(0.0);
    }
    Expr::sum(out)
}

fn build_mul(raw: &[Expr]) -> Expr {
    let mut coef = Number::int(1);
    let mut factors: Vec<Expr> = Vec::new();

    let mut stack: Vec<Expr> = raw.iter().rev().cloned().collect();
    while let Some(item) = stack.pop() {
        match item {
            // Pull signs out before the operand is simplified so that
            // -(a + b)*c keeps its sum intact.
            Expr::Neg(x) => {
                coef = coef.neg();
                stack.push(*x);
            }
            // Nested products are flattened first for the same reason.
            Expr::Mul(inner) => stack.extend(inner.into_iter().rev()),
            other => match pass(&other) {
                Expr::Const(c) => coef = coef.mul(c),
                Expr::Mul(inner) => {
                    for f in inner {
                        match f {
                            Expr::Const(c) => coef = coef.mul(c),
                            f => factors.push(f),
                        }
                    }
                }
                Expr::Neg(x) => {
                    coef = coef.neg();
                    factors.push(*x);
                }
                Expr::Div(num, den) if leading_minus(&num) => {
                    coef = coef.neg();
                    factors.push(build_div(negate(*num), *den));
                }
                f => factors.push(f),
            },
        }
    }

    if coef.is_zero() {
        return Expr::Const(coef);
    }

    // Combine repeated bases: x*x^2 -> x^3.
    let mut grouped: Vec<(Expr, i32)> = Vec::new();
    for f in factors {
        let (base, k) = match f {
            Expr::Pow(b, k) => (*b, k),
            other => (other, 1),
        };
        match grouped.iter_mut().find(|(b, _)| *b == base) {
            Some(slot) => slot.1 += k,
            None => grouped.push((base, k)),
        }
    }

    if grouped.iter().all(|(_, k)| *k == 0) {
        return Expr::Const(coef);
    }
    let mut items = Vec::new();
    if !coef.is_one() {
        items.push(Expr::Const(coef));
    }
    for (base, k) in grouped {
        match k {
            0 => {}
            1 => items.push(base),
            k => items.push(build_pow(base, k)),
        }
    }
    finish_mul(items)
}

fn finish_mul(items: Vec<Expr>) -> Expr {
    match items.as_slice() {
        [] => Expr::one(),
        [single] => single.clone(),
        [Expr::Const(c), rest] if c.is_minus_one() => match rest {
            Expr::Add(_) | Expr::Div(..) | Expr::Const(_) | Expr::Neg(_) => negate(rest.clone()),
            other => Expr::Neg(Box::new(other.clone())),
        },
        _ => Expr::Mul(items),
    }
}

fn build_div(num: Expr, den: Expr) -> Expr {
    if num.is_literal_zero() && !den.is_literal_zero() {
        return Expr::zero();
    }
    if let Some(d) = den.as_const() {
        if d.is_one() {
            return num;
        }
        if let (Number::Rational(_), Some(inv)) = (d, d.recip()) {
            return build_mul(&[Expr::Const(inv), num]);
        }
        if let (Some(n), Number::Float(df)) = (num.as_const(), d) {
            if df != 0.0 {
                return Expr::float(n.to_f64() / df);
            }
        }
    }
    if num == den && !den.is_literal_zero() {
        return Expr::one();
    }
    Expr::Div(Box::new(num), Box::new(den))
}

fn build_pow(base: Expr, k: i32) -> Expr {
    if k == 0 {
        return Expr::one();
    }
    if k == 1 {
        return base;
    }
    match base {
        Expr::Const(c) => match c.powi(k) {
            Some(v) => Expr::Const(v),
            None => Expr::Pow(Box::new(Expr::Const(c)), k),
        },
        Expr::Pow(inner, j) => match j.checked_mul(k) {
            Some(jk) => build_pow(*inner, jk),
            None => Expr::Pow(Box::new(Expr::Pow(inner, j)), k),
        },
        Expr::Neg(x) => {
            let p = build_pow(*x, k);
            if k % 2 == 0 {
                p
            } else {
                negate(p)
            }
        }
        other => Expr::Pow(Box::new(other), k),
    }
}

fn build_func(f: Func, arg: Expr) -> Expr {
    match arg.as_const() {
        Some(Number::Rational(r)) => {
            let zero = r == Rational64::from_integer(0);
            let one = r == Rational64::from_integer(1);
            let exact = match f {
                Func::Exp if zero => Some(Number::int(1)),
                Func::Ln if one => Some(Number::int(0)),
                Func::Sin | Func::Tan if zero => Some(Number::int(0)),
                Func::Cos if zero => Some(Number::int(1)),
                Func::Sqrt if !r.is_negative() => exact_sqrt(r),
                _ => None,
            };
            match exact {
                Some(v) => Expr::Const(v),
                None => Expr::Func(f, Box::new(arg)),
            }
        }
        Some(Number::Float(x)) => {
            let v = match f {
                Func::Exp => Some(x.exp()),
                Func::Ln if x > 0.0 => Some(x.ln()),
                Func::Sin => Some(x.sin()),
                Func::Cos => Some(x.cos()),
                Func::Tan => Some(x.tan()),
                Func::Sqrt if x >= 0.0 => Some(x.sqrt()),
                _ => None,
            };
            match v {
                Some(v) if v.is_finite() => Expr::float(v),
                _ => Expr::Func(f, Box::new(arg)),
            }
        }
        None => Expr::Func(f, Box::new(arg)),
    }
}

fn exact_sqrt(r: Rational64) -> Option<Number> {
    let isqrt = |v: i64| -> Option<i64> {
        let s = (v as f64).sqrt().round() as i64;
        (s.checked_mul(s) == Some(v)).then_some(s)
    };
    let n = isqrt(*r.numer())?;
    let d = isqrt(*r.denom())?;
    Some(Number::Rational(Rational64::new(n, d)))
}
