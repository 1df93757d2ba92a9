//! Text rendering in the input grammar. Output re-parses to the same tree
//! once both sides are simplified.

use super::{Expr, Number};

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(_) => ADD,
        Expr::Mul(_) | Expr::Div(..) => MUL,
        Expr::Neg(_) => NEG,
        Expr::Const(c) if c.is_negative() => NEG,
        Expr::Const(Number::Rational(r)) if !r.is_integer() => MUL,
        Expr::Pow(..) => POW,
        Expr::Const(_) | Expr::Var(_) | Expr::Func(..) => ATOM,
    }
}

fn wrap(e: &Expr, min_prec: u8) -> String {
    let s = to_text(e);
    if prec(e) < min_prec {
        format!("({s})")
    } else {
        s
    }
}

pub(super) fn format_number(n: Number) -> String {
    match n {
        Number::Rational(r) if r.is_integer() => r.numer().to_string(),
        Number::Rational(r) => format!("{}/{}", r.numer(), r.denom()),
        Number::Float(f) => {
            let s = format!("{f:?}");
            if s.contains(['.', 'e', 'E', 'i', 'N']) {
                s
            } else {
                format!("{s}.0")
            }
        }
    }
}

/// If `e` renders with a leading minus sign, the expression it negates.
fn negated_form(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Neg(x) => Some((**x).clone()),
        Expr::Const(c) if c.is_negative() => Some(Expr::Const(c.neg())),
        Expr::Mul(items) => match items.first() {
            Some(Expr::Const(c)) if c.is_negative() => {
                let mut rest = items[1..].to_vec();
                if !c.is_minus_one() {
                    rest.insert(0, Expr::Const(c.neg()));
                }
                Some(Expr::product(rest))
            }
            _ => None,
        },
        Expr::Div(a, b) => negated_form(a).map(|na| Expr::Div(Box::new(na), b.clone())),
        _ => None,
    }
}

pub(super) fn to_text(e: &Expr) -> String {
    match e {
        Expr::Const(c) => format_number(*c),
        Expr::Var(v) => v.clone(),
        Expr::Neg(x) => format!("-{}", wrap(x, POW)),
        Expr::Add(items) => {
            let mut out = String::new();
            for (i, item) in items.iter().enumerate() {
                if i == 0 {
                    out.push_str(&wrap(item, MUL));
                } else if let Some(m) = negated_form(item) {
                    out.push_str(" - ");
                    out.push_str(&wrap(&m, MUL));
                } else {
                    out.push_str(" + ");
                    out.push_str(&wrap(item, MUL));
                }
            }
            out
        }
        Expr::Mul(items) => {
            let (prefix, rest) = match items.first() {
                Some(Expr::Const(c)) if c.is_minus_one() && items.len() >= 2 => ("-", &items[1..]),
                _ => ("", &items[..]),
            };
            let parts: Vec<String> = rest
                .iter()
                .enumerate()
                .map(|(i, item)| if i == 0 && prefix.is_empty() { wrap(item, MUL) } else { wrap(item, POW) })
                .collect();
            format!("{prefix}{}", parts.join("*"))
        }
        Expr::Div(a, b) => format!("{}/{}", wrap(a, MUL), wrap(b, POW)),
        Expr::Pow(b, k) => format!("{}^{}", wrap(b, ATOM), k),
        Expr::Func(f, a) => format!("{}({})", f.name(), to_text(a)),
    }
}
