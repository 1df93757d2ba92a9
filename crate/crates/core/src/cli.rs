//! The commands behind the `fibrelin` binary, returning serializable reports.
//!
//! Every numeric claim in a report is a [`Check`]: the observed value, the
//! tolerance and the direction of the bound. Pass/fail is derived from those
//! when the report is printed or serialized.

use std::fmt;

use rand::Rng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::connection::connection_at;
use crate::error::{Error, Result};
use crate::expr::{diff, Expr, Point, SampleBox};
use crate::lie::{relative_degree, Certificate};
use crate::normal_form::{check_diffeomorphism, NormalForm};
use crate::numeric::{self, seeded, uniform_in, SeededRng};
use crate::sim::{self, InputSignal, Trajectory, DEFAULT_DT, DEFAULT_T_END};
use crate::system::SystemDef;
use crate::zerodyn::{
    lifted_dynamics, lifted_dynamics_symbolic, restrict_to_zero_fibre, zero_dynamics_at, zero_dynamics_symbolic,
    FibreRestriction,
};

pub const TOL_ENV: &str = "FIBRELIN_TOL";
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 42;
/// Half-width of the state box sampled around the operating point.
pub const SAMPLE_HALF_WIDTH: f64 = 2.0;
/// Half-width of the box initial conditions of trajectory checks are drawn from.
pub const TRAJECTORY_HALF_WIDTH: f64 = 0.5;
/// Trajectory checks are expensive; at most this many run per suite.
pub const TRAJECTORY_TRIALS_CAP: usize = 10;

/// Tolerances used by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Zero tests, relative degree and verticality.
    pub zero: f64,
    /// Pointwise identities of the connection.
    pub lift: f64,
    /// Trajectory-level comparisons.
    pub trajectory: f64,
    /// Relative error of symbolic derivatives against finite differences.
    pub derivative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { zero: DEFAULT_TOL, lift: 1e-10, trajectory: 1e-6, derivative: 1e-6 }
    }
}

impl Tolerances {
    /// Defaults, with `zero` taken from `FIBRELIN_TOL` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOL_ENV) {
            Ok(text) => Ok(Self::default().with_zero(parse_tol(&text)?)),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_zero(self, zero: f64) -> Self {
        Self { zero, ..self }
    }
}

fn parse_tol(text: &str) -> Result<f64> {
    match text.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::Precondition(format!("{TOL_ENV} must be a positive number, got `{text}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// One numeric claim.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub samples: usize,
    /// Samples where evaluation failed for a reason other than the domain
    /// of an elementary function.
    pub errors: Vec<String>,
}

impl Check {
    fn at_most(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), observed: 0.0, tolerance, bound: Bound::AtMost, samples: 0, errors: Vec::new() }
    }

    fn at_least(name: &str, tolerance: f64) -> Self {
        Self { observed: f64::INFINITY, bound: Bound::AtLeast, ..Self::at_most(name, tolerance) }
    }

    fn record(&mut self, value: f64) {
        self.samples += 1;
        self.observed = match self.bound {
            Bound::AtMost if value.is_nan() => f64::INFINITY,
            Bound::AtMost => self.observed.max(value),
            Bound::AtLeast if value.is_nan() => 0.0,
            Bound::AtLeast => self.observed.min(value),
        };
    }

    fn fail(&mut self, e: &Error) {
        if self.errors.len() < 5 {
            self.errors.push(e.to_string());
        } else if self.errors.len() == 5 {
            self.errors.push("...".into());
        }
    }

    pub fn passed(&self) -> bool {
        self.samples > 0
            && self.errors.is_empty()
            && match self.bound {
                Bound::AtMost => self.observed <= self.tolerance,
                Bound::AtLeast => self.observed >= self.tolerance,
            }
    }

    /// The observed value, clamped so that JSON can carry it.
    fn observed_finite(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else if self.observed.is_finite() {
            self.observed
        } else {
            f64::MAX.copysign(self.observed)
        }
    }
}

impl Serialize for Check {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Check", 7)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("passed", &self.passed())?;
        st.serialize_field("observed", &self.observed_finite())?;
        st.serialize_field("tolerance", &self.tolerance)?;
        st.serialize_field("bound", &self.bound)?;
        st.serialize_field("samples", &self.samples)?;
        st.serialize_field("errors", &self.errors)?;
        st.end()
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        write!(
            f,
            "{} {}: {:.3e} {op} {:.0e} ({} samples)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.observed_finite(),
            self.tolerance,
            self.samples
        )?;
        for e in &self.errors {
            write!(f, "\n    {e}")?;
        }
        Ok(())
    }
}

/// Records `value` on success, skips domain errors, logs anything else.
fn sample(check: &mut Check, value: Result<f64>) {
    match value {
        Ok(v) => check.record(v),
        Err(Error::Domain { .. }) => {}
        Err(e) => check.fail(&e),
    }
}

/// Everything `analyze` learns about a system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub system: String,
    pub states: Vec<String>,
    pub input: String,
    pub point: Vec<f64>,
    pub seed: u64,
    pub relative_degree: usize,
    pub certificates: Vec<Certificate>,
    pub phi: Vec<String>,
    pub alpha: String,
    pub beta: String,
    pub psi: String,
    pub complement: Vec<String>,
    /// `supplied` or `completed`.
    pub complement_source: String,
    pub lambda: Vec<String>,
    pub det_at_point: f64,
    pub min_abs_det: f64,
    pub det_samples: usize,
    pub lifted_dynamics: Option<Vec<String>>,
    pub zero_dynamics: Option<Vec<String>>,
    pub fibre_restriction: Option<RestrictionSummary>,
    pub diagnostics: Vec<String>,
    pub checks: Vec<Check>,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictionSummary {
    /// `state = expression` for each solved state.
    pub constraints: Vec<String>,
    pub free_states: Vec<String>,
    pub complement_rates: Vec<String>,
    pub state_field: Vec<String>,
    pub input_substituted: Option<String>,
}

impl From<&FibreRestriction> for RestrictionSummary {
    fn from(r: &FibreRestriction) -> Self {
        Self {
            constraints: r.constraints.iter().map(|(s, e)| format!("{s} = {e}")).collect(),
            free_states: r.free_states.clone(),
            complement_rates: r.complement_rates.iter().map(Expr::to_string).collect(),
            state_field: r.state_field.iter().map(Expr::to_string).collect(),
            input_substituted: r.input_substituted.as_ref().map(Expr::to_string),
        }
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[String]| format!("[{}]", v.join(", "));
        writeln!(f, "system {}", self.system)?;
        writeln!(f, "operating point {:?}", self.point)?;
        writeln!(f, "relative degree r = {}", self.relative_degree)?;
        for c in &self.certificates {
            writeln!(f, "  L_g L_f^{} h = {} ({})", c.k, c.expr, verdict_name(&c.verdict))?;
        }
        writeln!(f, "Φ = {}", list(&self.phi))?;
        writeln!(f, "α = {}", self.alpha)?;
        writeln!(f, "β = {}", self.beta)?;
        writeln!(f, "Ψ = {}", self.psi)?;
        writeln!(f, "complement ({}) = {}", self.complement_source, list(&self.complement))?;
        writeln!(f, "det JΛ at point = {}", self.det_at_point)?;
        writeln!(f, "min |det JΛ| over {} samples = {:.6e}", self.det_samples, self.min_abs_det)?;
        if let Some(l) = &self.lifted_dynamics {
            writeln!(f, "lifted dynamics = {}", list(l))?;
        }
        if let Some(z) = &self.zero_dynamics {
            writeln!(f, "zero dynamics f^Z = {}", list(z))?;
        }
        if let Some(r) = &self.fibre_restriction {
            writeln!(f, "on Φ = 0 ({}):", r.constraints.join(", "))?;
            for (s, e) in r.free_states.iter().zip(&r.state_field) {
                writeln!(f, "  d{s}/dt = {e}")?;
            }
        }
        for d in &self.diagnostics {
            writeln!(f, "note: {d}")?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn verdict_name(v: &crate::expr::ZeroVerdict) -> &'static str {
    match v {
        crate::expr::ZeroVerdict::SymbolicZero => "symbolic zero",
        crate::expr::ZeroVerdict::NumericZero { .. } => "numeric zero",
        crate::expr::ZeroVerdict::NonZero { .. } => "nonzero",
    }
}

/// Relative degree and normal form at `point` (the system's operating point
/// when `None`).
pub fn normal_form(sys: &SystemDef, point: Option<&[f64]>, tol: &Tolerances) -> Result<NormalForm> {
    let point = point.map_or_else(|| sys.operating_point(), <[f64]>::to_vec);
    if point.len() != sys.n() {
        return Err(Error::Dimension(format!("point has {} entries, expected {}", point.len(), sys.n())));
    }
    let rd = relative_degree(sys, &point, tol.zero)?;
    NormalForm::build_at(sys, &rd, &point)
}

pub fn analyze(sys: &SystemDef, point: Option<&[f64]>, tol: &Tolerances) -> Result<AnalysisReport> {
    let point = point.map_or_else(|| sys.operating_point(), <[f64]>::to_vec);
    if point.len() != sys.n() {
        return Err(Error::Dimension(format!("point has {} entries, expected {}", point.len(), sys.n())));
    }
    let rd = relative_degree(sys, &point, tol.zero)?;
    let nf = NormalForm::build_at(sys, &rd, &point)?;
    let region = SampleBox::around(&sys.states, &point, SAMPLE_HALF_WIDTH);
    let diffeo = check_diffeomorphism(&nf.lambda, &sys.states, &region, 64);
    let strings = |v: &[Expr]| v.iter().map(Expr::to_string).collect::<Vec<_>>();

    let mut diagnostics = Vec::new();
    if !diffeo.flagged.is_empty() {
        diagnostics.push(format!(
            "det JΛ vanishes at {} sampled point(s), e.g. {:?}",
            diffeo.flagged.len(),
            diffeo.flagged[0]
        ));
    }
    let mut lifted = None;
    let mut zero = None;
    let mut restriction = None;
    if nf.r == sys.n() {
        diagnostics.push(zero_dynamics_skipped(&nf));
    } else {
        lifted = lifted_dynamics_symbolic(&nf).map(|l| strings(&l));
        match zero_dynamics_symbolic(sys, &nf) {
            Some(fz) => {
                zero = Some(strings(&fz));
                match restrict_to_zero_fibre(sys, &nf, &fz) {
                    Ok(r) => restriction = Some(RestrictionSummary::from(&r)),
                    Err(e) => diagnostics.push(e.to_string()),
                }
            }
            None => diagnostics.push(format!("symbolic inverse of JΛ skipped for n = {} > 4", sys.n())),
        }
    }

    let mut rng = seeded(0);
    let mut checks = Vec::new();
    if nf.r < sys.n() {
        checks.push(verticality(sys, &nf, &region, 100, tol, &mut rng));
    }
    let mut projection = Check::at_most("projection", tol.trajectory);
    let v = InputSignal::parse("sin(t)")?;
    sample(
        &mut projection,
        sim::verify_projection(sys, &nf, &point, &v, DEFAULT_T_END, DEFAULT_DT)
            .map(|r| r.lifted_error.max(r.full_error)),
    );
    checks.push(projection);
    if nf.r < sys.n() {
        checks.push(fibre_invariance(sys, &nf, 10, tol, &mut rng));
    }

    Ok(AnalysisReport {
        system: sys.name.clone(),
        states: sys.states.clone(),
        input: sys.input.clone(),
        point,
        seed: 0,
        relative_degree: nf.r,
        certificates: rd.certificates.clone(),
        phi: strings(&nf.phi),
        alpha: nf.feedback.alpha.to_string(),
        beta: nf.feedback.beta.to_string(),
        psi: nf.feedback.psi.to_string(),
        complement: strings(&nf.complement),
        complement_source: if nf.complement_supplied { "supplied" } else { "completed" }.into(),
        lambda: strings(&nf.lambda),
        det_at_point: nf.det_at_point,
        min_abs_det: if diffeo.samples == 0 { 0.0 } else { diffeo.min_abs_det },
        det_samples: diffeo.samples,
        lifted_dynamics: lifted,
        zero_dynamics: zero,
        fibre_restriction: restriction,
        diagnostics,
        checks,
    })
}

fn zero_dynamics_skipped(nf: &NormalForm) -> String {
    format!("zero-dynamics pipeline skipped: r = n = {}, so the fibres of Φ are points", nf.r)
}

fn random_input(rng: &mut SeededRng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

/// `‖TΦ·f^Z(x, u)‖∞` at random `(x, u)`.
fn verticality(
    sys: &SystemDef,
    nf: &NormalForm,
    region: &SampleBox,
    n: usize,
    tol: &Tolerances,
    rng: &mut SeededRng,
) -> Check {
    let mut check = Check::at_most("verticality", tol.zero);
    for _ in 0..n {
        let x = uniform_in(rng, &region.lo, &region.hi);
        let u = random_input(rng);
        sample(&mut check, zero_dynamics_at(sys, nf, &x, u).and_then(|fz| Ok(numeric::max_abs(&nf.project(&x, &fz)?))));
    }
    check
}

/// `max_t ‖Φ(x(t)) − Φ(x0)‖∞` along `f^Z` with a constant random input.
fn fibre_invariance(sys: &SystemDef, nf: &NormalForm, n: usize, tol: &Tolerances, rng: &mut SeededRng) -> Check {
    let mut check = Check::at_most("fibre_invariance", tol.trajectory);
    let lo: Vec<f64> = nf.operating_point.iter().map(|c| c - TRAJECTORY_HALF_WIDTH).collect();
    let hi: Vec<f64> = nf.operating_point.iter().map(|c| c + TRAJECTORY_HALF_WIDTH).collect();
    for _ in 0..n {
        let x0 = uniform_in(rng, &lo, &hi);
        let u = InputSignal::Constant(random_input(rng));
        let drift = || -> Result<f64> {
            let traj = sim::simulate_zero(sys, nf, &x0, &u, DEFAULT_T_END, DEFAULT_DT)?;
            let phi0 = nf.phi_at(&x0)?;
            let mut worst: f64 = 0.0;
            for x in &traj.states {
                worst = worst.max(numeric::max_abs_diff(&nf.phi_at(x)?, &phi0));
            }
            Ok(worst)
        };
        sample(&mut check, drift());
    }
    check
}

/// A named group of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub name: String,
    pub checks: Vec<Check>,
}

impl Suite {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl Serialize for Suite {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Suite", 3)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("passed", &self.passed())?;
        st.serialize_field("checks", &self.checks)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub system: String,
    pub seed: u64,
    pub trials: usize,
    pub tolerances: Tolerances,
    pub suites: Vec<Suite>,
    pub diagnostics: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(Suite::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&Suite> {
        self.suites.iter().find(|s| s.name == name)
    }

    /// Largest observed residual among upper-bounded checks.
    pub fn worst_residual(&self) -> f64 {
        self.suites
            .iter()
            .flat_map(|s| &s.checks)
            .filter(|c| c.bound == Bound::AtMost)
            .map(Check::observed_finite)
            .fold(0.0, f64::max)
    }
}

impl Serialize for VerifyReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("VerifyReport", 8)?;
        st.serialize_field("system", &self.system)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("trials", &self.trials)?;
        st.serialize_field("tolerances", &self.tolerances)?;
        st.serialize_field("passed", &self.passed())?;
        st.serialize_field("worst_residual", &self.worst_residual())?;
        st.serialize_field("suites", &self.suites)?;
        st.serialize_field("diagnostics", &self.diagnostics)?;
        st.end()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {} (seed {}, {} trials)", self.system, self.seed, self.trials)?;
        for d in &self.diagnostics {
            writeln!(f, "note: {d}")?;
        }
        for s in &self.suites {
            writeln!(f, "[{}] {}", if s.passed() { "PASS" } else { "FAIL" }, s.name)?;
            for c in &s.checks {
                writeln!(f, "  {c}")?;
            }
        }
        write!(f, "worst residual {:.3e}", self.worst_residual())
    }
}

/// `|a − b| / max(|a|, |b|, 1)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Central difference of `e` in `var` at `at` with step `h`.
pub fn central_difference(e: &Expr, var: &str, at: &Point, h: f64) -> Result<f64> {
    let x = at.get(var).ok_or_else(|| Error::Unbound(var.into()))?;
    let plus = e.eval(&at.clone().with(var, x + h))?;
    let minus = e.eval(&at.clone().with(var, x - h))?;
    Ok((plus - minus) / (2.0 * h))
}

/// Distinct non-constant subexpressions of the system's fields.
pub fn system_subexpressions(sys: &SystemDef) -> Vec<Expr> {
    let mut roots: Vec<&Expr> = sys.f.iter().chain(&sys.g).chain([&sys.h]).collect();
    if let Some(c) = &sys.complement {
        roots.extend(c);
    }
    let mut out: Vec<Expr> = Vec::new();
    for e in roots.into_iter().flat_map(Expr::subexpressions) {
        if !e.free_symbols().is_empty() && !out.contains(e) {
            out.push(e.clone());
        }
    }
    out
}

/// Symbolic derivatives against central differences (step `1e-5`) at
/// random `(subexpression, state, point)` triples.
pub fn derivative_check(
    sys: &SystemDef,
    trials: usize,
    half_width: f64,
    tol: &Tolerances,
    rng: &mut SeededRng,
) -> Check {
    let mut check = Check::at_most("derivative_vs_finite_difference", tol.derivative);
    let pool = system_subexpressions(sys);
    if pool.is_empty() {
        return check;
    }
    let lo = vec![-half_width; sys.n()];
    let hi = vec![half_width; sys.n()];
    for _ in 0..trials {
        let e = &pool[rng.gen_range(0..pool.len())];
        let var = &sys.states[rng.gen_range(0..sys.n())];
        let at = sys.point(&uniform_in(rng, &lo, &hi));
        let value = diff(e, var).eval(&at).and_then(|d| Ok(relative_error(d, central_difference(e, var, &at, 1e-5)?)));
        sample(&mut check, value);
    }
    check
}

fn connection_suite(
    nf: &NormalForm,
    region: &SampleBox,
    trials: usize,
    tol: &Tolerances,
    rng: &mut SeededRng,
) -> Suite {
    let mut right_inverse = Check::at_most("right_inverse", tol.lift);
    let mut horizontality = Check::at_most("horizontality", tol.lift);
    let mut linearity = Check::at_most("linearity", tol.lift);
    let mut splitting = Check::at_most("exact_splitting", tol.lift);
    let mut uniqueness = Check::at_most("decomposition_uniqueness", tol.lift);
    let mut direct_sum = Check::at_least("direct_sum_margin", tol.zero);
    let (n, r) = (nf.n(), nf.r);
    for _ in 0..trials {
        let x = uniform_in(rng, &region.lo, &region.hi);
        let cp = match connection_at(nf, &x) {
            Ok(cp) => cp,
            Err(e) => {
                sample(&mut direct_sum, Err(e));
                continue;
            }
        };
        direct_sum.record(cp.direct_sum_margin());
        let y1 = numeric::uniform_cube(rng, r, 1.0);
        let y2 = numeric::uniform_cube(rng, r, 1.0);
        let a: f64 = rng.gen_range(-2.0..=2.0);
        let c = numeric::uniform_cube(rng, n - r, 1.0);
        let laws = || -> Result<[f64; 5]> {
            let h1 = cp.horizontal_lift(&y1)?;
            let h2 = cp.horizontal_lift(&y2)?;
            let combo: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + q).collect();
            let hc = cp.horizontal_lift(&combo)?;
            let expect: Vec<f64> = h1.iter().zip(&h2).map(|(p, q)| a * p + q).collect();
            let lam = cp.jacobian.rows(r, n - r) * nalgebra::DVector::from_column_slice(&h1);

            let vert: Vec<f64> = (&cp.v_basis * nalgebra::DVector::from_column_slice(&c)).as_slice().to_vec();
            let total: Vec<f64> = h1.iter().zip(&vert).map(|(p, q)| p + q).collect();
            let (xh, xv) = cp.decompose(&total)?;
            let sum: Vec<f64> = xh.iter().zip(&xv).map(|(p, q)| p + q).collect();
            Ok([
                numeric::max_abs_diff(&cp.project(&h1), &y1),
                lam.amax(),
                numeric::max_abs_diff(&hc, &expect),
                numeric::max_abs_diff(&sum, &total),
                numeric::max_abs_diff(&xh, &h1).max(numeric::max_abs_diff(&xv, &vert)),
            ])
        };
        match laws() {
            Ok(v) => {
                right_inverse.record(v[0]);
                horizontality.record(v[1]);
                linearity.record(v[2]);
                splitting.record(v[3]);
                uniqueness.record(v[4]);
            }
            Err(e) => right_inverse.fail(&e),
        }
    }
    Suite {
        name: "connection".into(),
        checks: vec![right_inverse, horizontality, linearity, splitting, uniqueness, direct_sum],
    }
}

fn zero_dynamics_suite(
    sys: &SystemDef,
    nf: &NormalForm,
    region: &SampleBox,
    trials: usize,
    tol: &Tolerances,
    rng: &mut SeededRng,
) -> Suite {
    let mut vertical = Check::at_most("verticality", tol.zero);
    let mut exact = Check::at_most("exact_decomposition", tol.lift);
    let mut consistent = Check::at_most("matches_vertical_part", tol.lift);
    let symbolic = zero_dynamics_symbolic(sys, nf);
    let mut agreement = Check::at_most("symbolic_agreement", tol.zero);
    for _ in 0..trials {
        let x = uniform_in(rng, &region.lo, &region.hi);
        let u = random_input(rng);
        let values = || -> Result<[f64; 3]> {
            let fz = zero_dynamics_at(sys, nf, &x, u)?;
            let total = sys.dynamics_at(&x, u)?;
            let lifted = lifted_dynamics(nf, &x, u)?;
            let recombined: Vec<f64> = lifted.iter().zip(&fz).map(|(a, b)| a + b).collect();
            let (_, xv) = connection_at(nf, &x)?.decompose(&total)?;
            Ok([
                numeric::max_abs(&nf.project(&x, &fz)?),
                numeric::max_abs_diff(&recombined, &total),
                numeric::max_abs_diff(&xv, &fz),
            ])
        };
        match values() {
            Ok(v) => {
                vertical.record(v[0]);
                exact.record(v[1]);
                consistent.record(v[2]);
            }
            Err(Error::Domain { .. }) => continue,
            Err(e) => vertical.fail(&e),
        }
        if let Some(sym) = &symbolic {
            let diff = crate::expr::eval_all(sym, &sys.point_with_input(&x, u))
                .and_then(|s| Ok(numeric::max_abs_diff(&s, &zero_dynamics_at(sys, nf, &x, u)?)));
            sample(&mut agreement, diff);
        }
    }
    let mut checks = vec![vertical, exact, consistent];
    if symbolic.is_some() {
        checks.push(agreement);
    }
    Suite { name: "zero_dynamics".into(), checks }
}

fn trajectory_suite(sys: &SystemDef, nf: &NormalForm, trials: usize, tol: &Tolerances, rng: &mut SeededRng) -> Suite {
    let trials = trials.min(TRAJECTORY_TRIALS_CAP);
    let mut projection = Check::at_most("projection", tol.trajectory);
    let lo: Vec<f64> = nf.operating_point.iter().map(|c| c - TRAJECTORY_HALF_WIDTH).collect();
    let hi: Vec<f64> = nf.operating_point.iter().map(|c| c + TRAJECTORY_HALF_WIDTH).collect();
    for _ in 0..trials {
        let x0 = uniform_in(rng, &lo, &hi);
        let amp: f64 = rng.gen_range(-1.0..=1.0);
        let v =
            InputSignal::Expr(Expr::Mul(vec![Expr::float(amp), Expr::apply(crate::expr::Func::Sin, Expr::var("t"))]));
        sample(
            &mut projection,
            sim::verify_projection(sys, nf, &x0, &v, DEFAULT_T_END, DEFAULT_DT)
                .map(|r| r.lifted_error.max(r.full_error)),
        );
    }
    let mut checks = vec![projection];
    if nf.r < nf.n() {
        checks.push(fibre_invariance(sys, nf, trials, tol, rng));
    }
    Suite { name: "trajectories".into(), checks }
}

/// Runs every property suite with a seeded generator.
pub fn verify(sys: &SystemDef, trials: usize, seed: u64, tol: &Tolerances) -> Result<VerifyReport> {
    let mut report = VerifyReport {
        system: sys.name.clone(),
        seed,
        trials,
        tolerances: *tol,
        suites: Vec::new(),
        diagnostics: Vec::new(),
    };
    if trials == 0 {
        return Ok(report);
    }
    let nf = normal_form(sys, None, tol)?;
    let region = SampleBox::around(&sys.states, &nf.operating_point, SAMPLE_HALF_WIDTH);
    let mut rng = seeded(seed);

    report.suites.push(Suite {
        name: "calculus".into(),
        checks: vec![derivative_check(sys, trials, SAMPLE_HALF_WIDTH, tol, &mut rng)],
    });
    report.suites.push(connection_suite(&nf, &region, trials, tol, &mut rng));
    if nf.r < sys.n() {
        report.suites.push(zero_dynamics_suite(sys, &nf, &region, trials, tol, &mut rng));
    } else {
        report.diagnostics.push(zero_dynamics_skipped(&nf));
    }
    report.suites.push(trajectory_suite(sys, &nf, trials, tol, &mut rng));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `ẋ = F(x, u)`.
    Full,
    /// `ẋ = f̃^H(x, v)`, input is `v`.
    Lifted,
    /// `ẋ = f^Z(x, u)`.
    Zero,
    /// `ż = A z + b v`, input is `v`.
    Linear,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "lifted" => Ok(Self::Lifted),
            "zero" => Ok(Self::Zero),
            "linear" => Ok(Self::Linear),
            _ => Err(Error::Precondition(format!("unknown mode `{s}` (full, lifted, zero, linear)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub mode: Mode,
    pub input: String,
    pub steps: usize,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub warnings: Vec<String>,
}

impl fmt::Display for SimulationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} mode, {} steps, state at t = {}: {:?}",
            self.mode, self.steps, self.final_time, self.final_state
        )?;
        for w in &self.warnings {
            write!(f, "\nwarning: {w}")?;
        }
        Ok(())
    }
}

pub fn simulate(
    sys: &SystemDef,
    mode: Mode,
    x0: &[f64],
    input: &InputSignal,
    t_end: f64,
    dt: f64,
    tol: &Tolerances,
) -> Result<(Trajectory, SimulationSummary)> {
    let expect_dim = |d: usize| {
        if x0.len() == d {
            Ok(())
        } else {
            Err(Error::Dimension(format!("initial condition has {} entries, {mode:?} mode needs {d}", x0.len())))
        }
    };
    let mut warnings = Vec::new();
    let traj = match mode {
        Mode::Full => {
            expect_dim(sys.n())?;
            sim::simulate_full(sys, x0, input, t_end, dt)?
        }
        Mode::Lifted => {
            expect_dim(sys.n())?;
            sim::simulate_lifted(&normal_form(sys, None, tol)?, x0, input, t_end, dt)?
        }
        Mode::Linear => {
            let nf = normal_form(sys, None, tol)?;
            expect_dim(nf.r)?;
            sim::simulate_linear(&nf, x0, input, t_end, dt)?
        }
        Mode::Zero => {
            expect_dim(sys.n())?;
            let nf = normal_form(sys, None, tol)?;
            let traj = sim::simulate_zero(sys, &nf, x0, input, t_end, dt)?;
            let phi0 = nf.phi_at(x0)?;
            let mut drift: f64 = 0.0;
            for x in &traj.states {
                drift = drift.max(numeric::max_abs_diff(&nf.phi_at(x)?, &phi0));
            }
            if drift > tol.trajectory {
                warnings.push(format!("Φ drifted by {drift:e} along the zero dynamics"));
            }
            traj
        }
    };
    let summary = SimulationSummary {
        mode,
        input: input.to_string(),
        steps: traj.len().saturating_sub(1),
        final_time: traj.times.last().copied().unwrap_or(0.0),
        final_state: traj.last().to_vec(),
        warnings,
    };
    Ok((traj, summary))
}

/// Horizontal lift of a sampled base curve through `x0`.
pub fn lift(sys: &SystemDef, base: &Trajectory, x0: &[f64], tol: &Tolerances) -> Result<Trajectory> {
    if x0.len() != sys.n() {
        return Err(Error::Dimension(format!("x0 has {} entries, expected {}", x0.len(), sys.n())));
    }
    sim::lift_curve(&normal_form(sys, None, tol)?, base, x0)
}

/// `{"error": {...}}` for a failed command.
pub fn error_json(e: &Error) -> serde_json::Value {
    let (line, column) = e.position().map_or((None, None), |(l, c)| (Some(l), Some(c)));
    serde_json::json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
            "exit_code": e.exit_code(),
            "line": line,
            "column": column,
        }
    })
}
