//! Horizontally lifted dynamics and the zero-dynamics field
//! `f^Z(x, u) = F(x, u) − Hor_x(A Φ(x) + b Ψ(x, u))`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::connection::{connection_at, symbolic_lift_matrix};
use crate::error::{Error, Result};
use crate::expr::{diff, normalize, simplify, Expr};
use crate::normal_form::NormalForm;
use crate::numeric;
use crate::sim::{integrate, InputSignal};
use crate::system::SystemDef;

/// Base vector `A z + b v` of the Brunovský chain.
fn quotient_rhs(z: &[f64], v: f64) -> Vec<f64> {
    z[1..].iter().copied().chain([v]).collect()
}

/// `Hor_x(A Φ(x) + b v)` with the linearised input `v` given directly.
pub fn lifted_field(nf: &NormalForm, x: &[f64], v: f64) -> Result<Vec<f64>> {
    let cp = connection_at(nf, x)?;
    cp.horizontal_lift(&quotient_rhs(&nf.phi_at(x)?, v))
}

/// `f̃^H(x, u)`: the quotient field at `(Φ(x), Ψ(x, u))`, lifted.
pub fn lifted_dynamics(nf: &NormalForm, x: &[f64], u: f64) -> Result<Vec<f64>> {
    let v = nf.feedback.value(&nf.point(x), u)?;
    lifted_field(nf, x, v)
}

/// `F(x, u) − f̃^H(x, u)`.
pub fn zero_dynamics_at(sys: &SystemDef, nf: &NormalForm, x: &[f64], u: f64) -> Result<Vec<f64>> {
    let total = sys.dynamics_at(x, u)?;
    let lifted = lifted_dynamics(nf, x, u)?;
    Ok(total.iter().zip(&lifted).map(|(a, b)| a - b).collect())
}

/// `A Φ + b Ψ` as expressions in the states and the input.
fn quotient_rhs_symbolic(nf: &NormalForm) -> Vec<Expr> {
    nf.phi[1..].iter().cloned().chain([nf.feedback.psi.clone()]).collect()
}

/// Closed form of `f̃^H`. `None` when the symbolic lift is unavailable.
pub fn lifted_dynamics_symbolic(nf: &NormalForm) -> Option<Vec<Expr>> {
    let h = symbolic_lift_matrix(nf)?;
    let y = quotient_rhs_symbolic(nf);
    Some(
        h.iter()
            .map(|row| {
                let terms = row.iter().zip(&y).map(|(hk, yk)| Expr::Mul(vec![hk.clone(), yk.clone()])).collect();
                simplify(&Expr::Add(terms))
            })
            .collect(),
    )
}

/// Closed form of `f^Z`. `None` when the symbolic lift is unavailable.
pub fn zero_dynamics_symbolic(sys: &SystemDef, nf: &NormalForm) -> Option<Vec<Expr>> {
    let lifted = lifted_dynamics_symbolic(nf)?;
    Some(
        sys.total_dynamics()
            .into_iter()
            .zip(lifted)
            .map(|(fi, li)| normalize(&Expr::Add(vec![fi, li.neg()])))
            .collect(),
    )
}

/// `f^Z` restricted to the zero fibre `Φ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FibreRestriction {
    /// Solved states, each as an expression in the free states.
    pub constraints: Vec<(String, Expr)>,
    /// States parameterising the zero fibre.
    pub free_states: Vec<String>,
    /// `d/dt λ_j` along `f^Z` for each complementary coordinate.
    pub complement_rates: Vec<Expr>,
    /// `f^Z` components of the free states, on the fibre.
    pub state_field: Vec<Expr>,
    /// The output-zeroing input `−α/β`, when `f^Z` depended on the input.
    pub input_substituted: Option<Expr>,
}

impl FibreRestriction {
    /// Full state from the free-state values.
    pub fn embed(&self, states: &[String], free: &[f64]) -> Result<Vec<f64>> {
        let at = crate::expr::Point::from_slices(&self.free_states, free);
        states
            .iter()
            .map(|s| match self.free_states.iter().position(|f| f == s) {
                Some(i) => Ok(free[i]),
                None => {
                    let (_, e) = self.constraints.iter().find(|(c, _)| c == s).expect("every state is free or solved");
                    e.eval(&at)
                }
            })
            .collect()
    }
}

/// Solves `phi = 0` for one state in which it is affine with a constant
/// nonzero coefficient. Returns the state and its value.
fn solve_affine(phi: &Expr, candidates: &[String]) -> Option<(String, Expr)> {
    for s in candidates {
        if !phi.contains_symbol(s) {
            continue;
        }
        let Some(coef) = simplify(&diff(phi, s)).as_const() else { continue };
        if coef.is_zero() {
            continue;
        }
        let rest = normalize(&phi.substitute(s, &Expr::zero()));
        let value = normalize(&rest.neg().div(Expr::Const(coef)));
        return Some((s.clone(), value));
    }
    None
}

/// Substitutes the coordinate-explicit solution of `Φ = 0` into `f^Z`.
///
/// Each `Φ_i = 0` is solved for a not yet solved state in which it is affine
/// with a constant coefficient. If `f^Z` still depends on the input, the
/// output-zeroing input `−α/β` is substituted.
pub fn restrict_to_zero_fibre(sys: &SystemDef, nf: &NormalForm, fz: &[Expr]) -> Result<FibreRestriction> {
    let mut solved: BTreeMap<String, Expr> = BTreeMap::new();
    let mut order: Vec<(String, Expr)> = Vec::new();
    for (i, phi) in nf.phi.iter().enumerate() {
        let reduced = normalize(&phi.substitute_all(&solved));
        if reduced.is_literal_zero() {
            continue;
        }
        let open: Vec<String> = sys.states.iter().filter(|s| !solved.contains_key(*s)).cloned().collect();
        let Some((s, value)) = solve_affine(&reduced, &open) else {
            return Err(Error::ConstraintNotExplicit(format!("Φ[{}] = {} = 0", i + 1, reduced)));
        };
        for e in solved.values_mut() {
            *e = normalize(&e.substitute(&s, &value));
        }
        solved.insert(s.clone(), value.clone());
        order.push((s, value));
    }
    let constraints: Vec<(String, Expr)> = order
        .into_iter()
        .map(|(s, _)| {
            let e = solved[&s].clone();
            (s, e)
        })
        .collect();
    let free_states: Vec<String> = sys.states.iter().filter(|s| !solved.contains_key(*s)).cloned().collect();

    let needs_input = fz.iter().any(|e| e.contains_symbol(&sys.input));
    let input_substituted = needs_input.then(|| normalize(&nf.feedback.zeroing_input().substitute_all(&solved)));
    let restrict = |e: &Expr| {
        let mut out = e.substitute_all(&solved);
        if let Some(u) = &input_substituted {
            out = out.substitute(&sys.input, u);
        }
        normalize(&out)
    };

    let complement_rates = nf
        .complement
        .iter()
        .map(|lam| {
            let terms = sys.states.iter().zip(fz).map(|(s, fi)| Expr::Mul(vec![diff(lam, s), fi.clone()])).collect();
            restrict(&Expr::Add(terms))
        })
        .collect();
    let state_field =
        sys.states.iter().zip(fz).filter(|(s, _)| free_states.contains(s)).map(|(_, fi)| restrict(fi)).collect();
    Ok(FibreRestriction { constraints, free_states, complement_rates, state_field, input_substituted })
}

/// Above this `‖Φ(x(t))‖∞` the closed loop is reported as drifting off the fibre.
pub const DRIFT_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedComparison {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub closed_loop_final: Vec<f64>,
    pub restricted_final: Vec<f64>,
    /// `max_t ‖x_closed(t) − x_restricted(t)‖∞`.
    pub max_discrepancy: f64,
    /// `max_t ‖Φ(x_closed(t))‖∞`.
    pub max_output: f64,
    pub warnings: Vec<String>,
}

/// Integrates the closed loop under `u = −α/β` and the fibre-restricted
/// zero dynamics from the same initial point and compares them.
pub fn compare_with_constrained_definition(
    sys: &SystemDef,
    nf: &NormalForm,
    restriction: &FibreRestriction,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<ConstrainedComparison> {
    let phi0 = nf.phi_at(x0)?;
    if numeric::max_abs(&phi0) > 1e-9 {
        return Err(Error::Precondition(format!("Φ(x0) = {phi0:?} is not on the zero fibre")));
    }
    let zeroing = nf.feedback.zeroing_input();
    let closed = integrate(
        |x, _, _| {
            let u = zeroing.eval(&sys.point(x))?;
            sys.dynamics_at(x, u)
        },
        x0,
        &InputSignal::Constant(0.0),
        t_end,
        dt,
    )?;

    let free0: Vec<f64> = restriction
        .free_states
        .iter()
        .map(|s| x0[sys.states.iter().position(|t| t == s).expect("free state is a state")])
        .collect();
    let restricted = integrate(
        |w, _, _| {
            crate::expr::eval_all(
                &restriction.state_field,
                &crate::expr::Point::from_slices(&restriction.free_states, w),
            )
        },
        &free0,
        &InputSignal::Constant(0.0),
        t_end,
        dt,
    )?;

    let mut max_discrepancy: f64 = 0.0;
    let mut max_output: f64 = 0.0;
    let mut restricted_final = Vec::new();
    for (x, w) in closed.states.iter().zip(&restricted.states) {
        let embedded = restriction.embed(&sys.states, w)?;
        max_discrepancy = max_discrepancy.max(numeric::max_abs_diff(x, &embedded));
        max_output = max_output.max(numeric::max_abs(&nf.phi_at(x)?));
        restricted_final = embedded;
    }
    let mut warnings = Vec::new();
    if max_output > DRIFT_WARNING {
        warnings.push(format!("closed loop drifted off the zero fibre: max ‖Φ(x(t))‖∞ = {max_output:e}"));
    }
    Ok(ConstrainedComparison {
        x0: x0.to_vec(),
        t_end,
        dt,
        closed_loop_final: closed.states.last().cloned().unwrap_or_default(),
        restricted_final,
        max_discrepancy,
        max_output,
        warnings,
    })
}
