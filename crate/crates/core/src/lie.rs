//! Lie derivatives and relative degree.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{diff, is_zero, simplify, Expr, SampleBox, ZeroVerdict};
use crate::system::SystemDef;

/// Half-width of the sampling box around the operating point used to
/// certify that `L_g L_f^k h` vanishes identically.
pub const CERTIFICATE_HALF_WIDTH: f64 = 2.0;
pub const CERTIFICATE_SAMPLES: usize = 20;

/// `Σ_i ∂h/∂x_i · X_i`, simplified.
pub fn lie_derivative<S: AsRef<str>>(field: &[Expr], h: &Expr, states: &[S]) -> Expr {
    let terms = field.iter().zip(states).map(|(xi, s)| Expr::Mul(vec![diff(h, s.as_ref()), xi.clone()])).collect();
    simplify(&Expr::Add(terms))
}

/// `L_X^k h`; `k = 0` returns `h`.
pub fn iterated_lie<S: AsRef<str>>(field: &[Expr], h: &Expr, k: usize, states: &[S]) -> Expr {
    (0..k).fold(h.clone(), |acc, _| lie_derivative(field, &acc, states))
}

/// Certificate that `L_g L_f^k h` vanishes near the operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub k: usize,
    pub expr: String,
    #[serde(flatten)]
    pub verdict: ZeroVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeDegreeResult {
    pub r: usize,
    /// `L_f^r h`.
    pub alpha: Expr,
    /// `L_g L_f^{r-1} h`.
    pub beta: Expr,
    /// `L_f^k h` for `k = 0..r`; the first `r` are the output coordinates.
    pub output_derivatives: Vec<Expr>,
    /// One entry per `k = 0..r-2`.
    pub certificates: Vec<Certificate>,
    pub beta_at_point: f64,
}

/// Smallest `r` with `L_g L_f^{r-1} h(x⁰) ≠ 0` and `L_g L_f^k h ≡ 0` for `k < r-1`.
pub fn relative_degree(sys: &SystemDef, point: &[f64], tol: f64) -> Result<RelativeDegreeResult> {
    let n = sys.n();
    if point.len() != n {
        return Err(Error::Dimension(format!("point has {} entries, expected {n}", point.len())));
    }
    let at = sys.point(point);
    let region = SampleBox::around(&sys.states, point, CERTIFICATE_HALF_WIDTH);

    let mut certificates = Vec::new();
    let mut lf = vec![sys.h.clone()];
    for k in 0..n {
        let lg = lie_derivative(&sys.g, &lf[k], &sys.states);
        let value = lg.eval(&at)?;
        if value.abs() > tol {
            let alpha = lie_derivative(&sys.f, &lf[k], &sys.states);
            lf.push(alpha.clone());
            return Ok(RelativeDegreeResult {
                r: k + 1,
                alpha,
                beta: lg,
                output_derivatives: lf,
                certificates,
                beta_at_point: value,
            });
        }
        let verdict = is_zero(&lg, &region, CERTIFICATE_SAMPLES, tol)?;
        if !verdict.is_zero() {
            return Err(Error::Degenerate { expr: lg.to_string() });
        }
        certificates.push(Certificate { k, expr: lg.to_string(), verdict });
        let next = lie_derivative(&sys.f, &lf[k], &sys.states);
        lf.push(next);
    }
    let trail = certificates.iter().map(|c| format!("k={}: {:?}", c.k, c.verdict)).collect::<Vec<_>>().join("; ");
    Err(Error::NoRelativeDegree { trail })
}
