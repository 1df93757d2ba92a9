//! Output coordinates `Φ`, linearising feedback `Ψ`, completion of `Φ` to a
//! local diffeomorphism `Λ`, and the Brunovský quotient system.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{jacobian, simplify, Expr, Halton, Point, SampleBox};
use crate::lie::RelativeDegreeResult;
use crate::numeric::{self, eval_matrix};
use crate::system::SystemDef;

/// Smallest admissible `|det JΛ|` at the operating point.
pub const DET_TOL: f64 = 1e-9;

/// Static feedback `v = Ψ(x, u) = α(x) + β(x)·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub alpha: Expr,
    pub beta: Expr,
    /// `β·u + α`, simplified.
    pub psi: Expr,
    input: String,
}

impl Feedback {
    pub fn value(&self, at: &Point, u: f64) -> Result<f64> {
        Ok(self.alpha.eval(at)? + self.beta.eval(at)? * u)
    }

    /// `u = (v − α)/β`.
    pub fn inverse(&self, at: &Point, v: f64) -> Result<f64> {
        let beta = self.beta.eval(at)?;
        if beta == 0.0 {
            return Err(Error::Domain { subexpr: self.beta.to_string(), reason: "β vanishes".into() });
        }
        Ok((v - self.alpha.eval(at)?) / beta)
    }

    /// `(v − α)/β` with `v` as a free symbol.
    pub fn inverse_expr(&self, v: &str) -> Expr {
        simplify(&Expr::Add(vec![Expr::var(v), self.alpha.clone().neg()]).div(self.beta.clone()))
    }

    /// Output-zeroing input `−α/β`.
    pub fn zeroing_input(&self) -> Expr {
        simplify(&self.alpha.clone().neg().div(self.beta.clone()))
    }

    pub fn input(&self) -> &str {
        &self.input
    }
}

/// `(A, b)` of the chain of `r` integrators.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQuotient {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearQuotient {
    pub fn r(&self) -> usize {
        self.b.len()
    }

    /// `A z + b v`.
    pub fn field(&self, z: &[f64], v: f64) -> Vec<f64> {
        let out = &self.a * DVector::from_column_slice(z) + &self.b * v;
        out.as_slice().to_vec()
    }

    pub fn controllability_rank(&self) -> usize {
        let r = self.r();
        let mut ctrb = DMatrix::zeros(r, r);
        let mut col = self.b.clone();
        for k in 0..r {
            ctrb.set_column(k, &col);
            col = &self.a * col;
        }
        numeric::rank(&ctrb, 1e-12)
    }
}

pub fn quotient_linear(r: usize) -> LinearQuotient {
    assert!(r >= 1, "relative degree is at least 1");
    let mut a = DMatrix::zeros(r, r);
    for i in 0..r - 1 {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = DVector::zeros(r);
    b[r - 1] = 1.0;
    LinearQuotient { a, b }
}

/// The first `r` Lie-derivative coordinates `[h, L_f h, ..., L_f^{r-1} h]`.
pub fn build_phi(rd: &RelativeDegreeResult) -> Vec<Expr> {
    rd.output_derivatives[..rd.r].iter().map(simplify).collect()
}

pub fn build_feedback(sys: &SystemDef, rd: &RelativeDegreeResult) -> Feedback {
    let psi = simplify(&Expr::Add(vec![Expr::Mul(vec![rd.beta.clone(), Expr::var(&sys.input)]), rd.alpha.clone()]));
    Feedback { alpha: rd.alpha.clone(), beta: rd.beta.clone(), psi, input: sys.input.clone() }
}

/// Completes `phi` with `n − r` functions so that the stacked Jacobian is
/// nonsingular at `point`.
///
/// A user-supplied complement is validated. Otherwise coordinate functions
/// `x_i` are added greedily, each time the one maximising the smallest
/// singular value of the stacked Jacobian; ties go to the lowest index.
pub fn complete_coordinates(sys: &SystemDef, phi: &[Expr], point: &[f64]) -> Result<Vec<Expr>> {
    let n = sys.n();
    let r = phi.len();
    let at = sys.point(point);
    let phi_jac = eval_matrix(&jacobian(phi, &sys.states), &at)?;
    let rank = numeric::rank(&phi_jac, DET_TOL);
    if rank < r {
        return Err(Error::RankDeficient { rank, expected: r });
    }

    if let Some(given) = &sys.complement {
        if given.len() != n - r {
            return Err(Error::Dimension(format!(
                "complement has {} entries, relative degree {r} needs {}",
                given.len(),
                n - r
            )));
        }
        let lambda: Vec<Expr> = phi.iter().chain(given).cloned().collect();
        let det = numeric::determinant(&eval_matrix(&jacobian(&lambda, &sys.states), &at)?);
        if det.abs() < DET_TOL {
            return Err(Error::CompletionFailed(format!(
                "supplied complement gives det JΛ = {det:e} at the operating point"
            )));
        }
        return Ok(given.clone());
    }

    let mut rows: Vec<DVector<f64>> = (0..r).map(|i| phi_jac.row(i).transpose()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while rows.len() < n {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let mut trial = rows.clone();
            trial.push(e);
            let m = DMatrix::from_rows(&trial.iter().map(|c| c.transpose()).collect::<Vec<_>>());
            let s = numeric::min_singular_value(&m);
            if best.is_none_or(|(_, b)| s > b + 1e-12) {
                best = Some((i, s));
            }
        }
        let (i, _) = best.expect("n > r leaves a candidate");
        chosen.push(i);
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        rows.push(e);
    }
    let m = DMatrix::from_rows(&rows.iter().map(|c| c.transpose()).collect::<Vec<_>>());
    let det = numeric::determinant(&m);
    if det.abs() < DET_TOL {
        return Err(Error::CompletionFailed(format!("best coordinate completion has |det JΛ| = {:e}", det.abs())));
    }
    Ok(chosen.into_iter().map(|i| Expr::var(&sys.states[i])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffeomorphismReport {
    pub samples: usize,
    pub min_abs_det: f64,
    pub argmin: Vec<f64>,
    /// Points with `|det JΛ| ≤ DET_TOL`.
    pub flagged: Vec<Vec<f64>>,
    /// Points where evaluation failed, with the reason.
    pub domain_errors: Vec<(Vec<f64>, String)>,
}

impl DiffeomorphismReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty() && self.min_abs_det > DET_TOL
    }
}

/// Samples `det JΛ` over `region` (quasi-random points, plus the box centre).
pub fn check_diffeomorphism<S: AsRef<str>>(
    lambda: &[Expr],
    states: &[S],
    region: &SampleBox,
    samples: usize,
) -> DiffeomorphismReport {
    let jac = jacobian(lambda, states);
    let center: Vec<f64> = region.lo.iter().zip(&region.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let points = std::iter::once(center).chain(Halton::new(region.dim()).map(|u| region.scale(&u)));
    let mut report = DiffeomorphismReport {
        samples: 0,
        min_abs_det: f64::INFINITY,
        argmin: Vec::new(),
        flagged: Vec::new(),
        domain_errors: Vec::new(),
    };
    for x in points.take(samples.max(1)) {
        let at = Point::from_slices(states, &x);
        match eval_matrix(&jac, &at) {
            Ok(m) => {
                report.samples += 1;
                let d = numeric::determinant(&m).abs();
                if d < report.min_abs_det {
                    report.min_abs_det = d;
                    report.argmin = x.clone();
                }
                if d <= DET_TOL {
                    report.flagged.push(x);
                }
            }
            Err(e) => report.domain_errors.push((x, e.to_string())),
        }
    }
    report
}

/// Everything downstream modules need about the normal form.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub r: usize,
    pub states: Vec<String>,
    pub input: String,
    pub phi: Vec<Expr>,
    pub feedback: Feedback,
    pub complement: Vec<Expr>,
    /// `Φ ⧺ complement`.
    pub lambda: Vec<Expr>,
    pub jacobian: Vec<Vec<Expr>>,
    pub operating_point: Vec<f64>,
    /// Signed `det JΛ` at the operating point.
    pub det_at_point: f64,
    pub min_abs_det: f64,
    /// Whether the complement came from the system definition.
    pub complement_supplied: bool,
}

impl NormalForm {
    pub fn build(sys: &SystemDef, rd: &RelativeDegreeResult) -> Result<Self> {
        Self::build_at(sys, rd, &sys.operating_point())
    }

    pub fn build_at(sys: &SystemDef, rd: &RelativeDegreeResult, point: &[f64]) -> Result<Self> {
        let phi = build_phi(rd);
        let feedback = build_feedback(sys, rd);
        let complement = complete_coordinates(sys, &phi, point)?;
        let lambda: Vec<Expr> = phi.iter().chain(&complement).cloned().collect();
        let jac = jacobian(&lambda, &sys.states);
        let det = numeric::determinant(&eval_matrix(&jac, &sys.point(point))?);
        if det.abs() < DET_TOL {
            return Err(Error::SingularJacobian { det, point: point.to_vec(), time: None });
        }
        Ok(Self {
            r: rd.r,
            states: sys.states.clone(),
            input: sys.input.clone(),
            phi,
            feedback,
            complement,
            lambda,
            jacobian: jac,
            operating_point: point.to_vec(),
            det_at_point: det,
            min_abs_det: det.abs(),
            complement_supplied: sys.complement.is_some(),
        })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn quotient(&self) -> LinearQuotient {
        quotient_linear(self.r)
    }

    pub fn point(&self, x: &[f64]) -> Point {
        Point::from_slices(&self.states, x)
    }

    /// `Φ(x)`.
    pub fn phi_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        crate::expr::eval_all(&self.phi, &self.point(x))
    }

    /// Numeric `JΛ(x)`.
    pub fn jacobian_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        eval_matrix(&self.jacobian, &self.point(x))
    }

    /// Numeric `TΦ(x)`, the first `r` rows of `JΛ`.
    pub fn phi_jacobian_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jacobian_at(x)?.rows(0, self.r).into_owned())
    }

    /// `TΦ(x)·X`.
    pub fn project(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let out = self.phi_jacobian_at(x)? * DVector::from_column_slice(v);
        Ok(out.as_slice().to_vec())
    }

    /// Sample box of half-width `half` around the operating point.
    pub fn region(&self, half: f64) -> SampleBox {
        SampleBox::around(&self.states, &self.operating_point, half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::relative_degree;
    use crate::numeric::seeded;
    use crate::system::parse_system;
    use rand::Rng;

    const EXAMPLE: &str = "states x1 x2 x3\ninput u\nf = [-x1, x1*x2, x2]\ng = [exp(x2), 1, 0]\nh = x3\ncomplement = [1 + x1 - exp(x2)]\n";

    fn example(complement: bool) -> (SystemDef, RelativeDegreeResult) {
        let text =
            if complement { EXAMPLE.to_string() } else { EXAMPLE.replace("complement = [1 + x1 - exp(x2)]\n", "") };
        let sys = parse_system(&text).unwrap();
        let rd = relative_degree(&sys, &[0.0; 3], 1e-9).unwrap();
        (sys, rd)
    }

    #[test]
    fn phi_of_example() {
        let (_, rd) = example(true);
        let phi = build_phi(&rd);
        assert_eq!(crate::expr::format_list(&phi), "[x3, x2]");
    }

    #[test]
    fn phi_small_cases() {
        let sys = parse_system("states x1 x2\ninput u\nf = [x2, 0]\ng = [0, 1]\nh = x1").unwrap();
        let rd = relative_degree(&sys, &[0.0; 2], 1e-9).unwrap();
        assert_eq!(crate::expr::format_list(&build_phi(&rd)), "[x1, x2]");
        let sys = parse_system("states x1 x2\ninput u\nf = [x2, x1]\ng = [1, 0]\nh = x1").unwrap();
        let rd = relative_degree(&sys, &[0.0; 2], 1e-9).unwrap();
        assert_eq!(build_phi(&rd), vec![Expr::var("x1")]);
    }

    #[test]
    fn feedback_of_example() {
        let (sys, rd) = example(true);
        let fb = build_feedback(&sys, &rd);
        assert_eq!(fb.psi.to_string(), "u + x1*x2");
        assert_eq!(fb.zeroing_input().to_string(), "-x1*x2");
    }

    #[test]
    fn feedback_of_linear_controllable_form() {
        let sys = parse_system("states x1 x2\ninput u\nf = [x2, -2*x1 - 3*x2]\ng = [0, 1]\nh = x1").unwrap();
        let rd = relative_degree(&sys, &[0.0; 2], 1e-9).unwrap();
        let fb = build_feedback(&sys, &rd);
        assert_eq!(fb.beta, Expr::one());
        assert_eq!(fb.alpha.to_string(), "-2*x1 - 3*x2");
    }

    #[test]
    fn feedback_inverse_roundtrip() {
        let (sys, rd) = example(true);
        let fb = build_feedback(&sys, &rd);
        let mut rng = seeded(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let at = sys.point(&x);
            let v = fb.value(&at, u).unwrap();
            assert!((fb.inverse(&at, v).unwrap() - u).abs() <= 1e-12);
        }
    }

    #[test]
    fn supplied_complement_is_kept() {
        let (sys, rd) = example(true);
        let c = complete_coordinates(&sys, &build_phi(&rd), &[0.0; 3]).unwrap();
        assert_eq!(crate::expr::format_list(&c), "[1 + x1 - exp(x2)]");
    }

    #[test]
    fn heuristic_completion_matches_enumeration() {
        let (sys, rd) = example(false);
        let phi = build_phi(&rd);
        let c = complete_coordinates(&sys, &phi, &[0.0; 3]).unwrap();
        // Enumerate single-coordinate completions; only x1 is nonsingular.
        let dets: Vec<f64> = sys
            .states
            .iter()
            .map(|s| {
                let lambda: Vec<Expr> = phi.iter().cloned().chain([Expr::var(s)]).collect();
                numeric::determinant(&eval_matrix(&jacobian(&lambda, &sys.states), &sys.point(&[0.0; 3])).unwrap())
            })
            .collect();
        assert_eq!(dets.iter().map(|d| d.abs()).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert_eq!(c, vec![Expr::var("x1")]);
    }

    #[test]
    fn square_phi_needs_no_completion() {
        let sys = parse_system("states x1 x2\ninput u\nf = [x2, 0]\ng = [0, 1]\nh = x1").unwrap();
        let rd = relative_degree(&sys, &[0.0; 2], 1e-9).unwrap();
        assert!(complete_coordinates(&sys, &build_phi(&rd), &[0.0; 2]).unwrap().is_empty());
    }

    #[test]
    fn rank_deficient_output_map() {
        // h = x1^2 has zero differential at the origin.
        let sys = parse_system("states x1 x2\ninput u\nf = [x2, 0]\ng = [1, 0]\nh = x1^2").unwrap();
        let phi = vec![sys.h.clone()];
        assert!(matches!(complete_coordinates(&sys, &phi, &[0.0; 2]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn diffeomorphism_report() {
        let x = ["x1", "x2", "x3"];
        let table = crate::expr::SymbolTable::with_states(&x);
        let parse = |s: &str| crate::expr::parse_expr(s, &table).unwrap();
        let region = SampleBox::cube(&x, 2.0);

        // det [[0,0,1],[0,1,0],[1,-exp(x2),0]] = -1 by cofactor expansion on row 1.
        let lambda = vec![parse("x3"), parse("x2"), parse("1 + x1 - exp(x2)")];
        let rep = check_diffeomorphism(&lambda, &x, &region, 50);
        assert!((rep.min_abs_det - 1.0).abs() < 1e-12);
        assert!(rep.passed());

        let ident = vec![parse("x1"), parse("x2"), parse("x3")];
        assert_eq!(check_diffeomorphism(&ident, &x, &region, 10).min_abs_det, 1.0);

        let repeated = vec![parse("x1"), parse("x1"), parse("x3")];
        let rep = check_diffeomorphism(&repeated, &x, &region, 10);
        assert!(!rep.passed());
        assert!(rep.min_abs_det < 1e-12);
    }

    #[test]
    fn brunovsky_pair() {
        let q = quotient_linear(2);
        assert_eq!(q.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(q.b, DVector::from_vec(vec![0.0, 1.0]));
        let q = quotient_linear(1);
        assert_eq!(q.a, DMatrix::zeros(1, 1));
        assert_eq!(q.b, DVector::from_vec(vec![1.0]));
        for r in 1..=6 {
            assert_eq!(quotient_linear(r).controllability_rank(), r);
        }
    }

    #[test]
    fn normal_form_of_example() {
        let (sys, rd) = example(true);
        let nf = NormalForm::build(&sys, &rd).unwrap();
        assert_eq!(nf.det_at_point, -1.0);
        assert_eq!(nf.lambda.len(), 3);
    }
}
