use super::{simplify, Expr, Func, Number};

/// Exact partial derivative of `e` with respect to `var`, simplified.
pub fn diff(e: &Expr, var: &str) -> Expr {
    simplify(&raw(e, var))
}

fn raw(e: &Expr, var: &str) -> Expr {
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(v) => {
            if v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::Neg(Box::new(raw(a, var))),
        Expr::Add(items) => Expr::Add(items.iter().map(|i| raw(i, var)).collect()),
        Expr::Mul(items) => {
            // Product rule over n factors.
            let terms = (0..items.len())
                .filter(|&i| items[i].contains_symbol(var))
                .map(|i| {
                    let mut factors = items.clone();
                    factors[i] = raw(&items[i], var);
                    Expr::Mul(factors)
                })
                .collect();
            Expr::sum(terms)
        }
        Expr::Div(a, b) => {
            let da = raw(a, var);
            let db = raw(b, var);
            let num = Expr::Add(vec![
                Expr::Mul(vec![da, (**b).clone()]),
                Expr::Neg(Box::new(Expr::Mul(vec![(**a).clone(), db]))),
            ]);
            Expr::Div(Box::new(num), Box::new((**b).clone().powi(2)))
        }
        Expr::Pow(_, 0) => Expr::zero(),
        Expr::Pow(b, k) => {
            Expr::Mul(vec![Expr::Const(Number::int(i64::from(*k))), (**b).clone().powi(k - 1), raw(b, var)])
        }
        Expr::Func(f, a) => {
            let inner = raw(a, var);
            let a = (**a).clone();
            let outer = match f {
                Func::Exp => Expr::apply(Func::Exp, a),
                Func::Ln => Expr::one().div(a),
                Func::Sin => Expr::apply(Func::Cos, a),
                Func::Cos => Expr::apply(Func::Sin, a).neg(),
                Func::Tan => Expr::Add(vec![Expr::one(), Expr::apply(Func::Tan, a).powi(2)]),
                Func::Sqrt => Expr::one().div(Expr::Mul(vec![Expr::int(2), Expr::apply(Func::Sqrt, a)])),
            };
            Expr::Mul(vec![outer, inner])
        }
    }
}

/// Matrix of partial derivatives: entry (i, j) is `diff(v[i], vars[j])`.
pub fn jacobian<S: AsRef<str>>(v: &[Expr], vars: &[S]) -> Vec<Vec<Expr>> {
    v.iter().map(|e| vars.iter().map(|x| diff(e, x.as_ref())).collect()).collect()
}
