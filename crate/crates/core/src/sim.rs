//! Fixed-step RK4 integration, trajectories, and the trajectory-level
//! checks that lifted motion projects onto the linear quotient.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Point, SymbolTable};
use crate::normal_form::NormalForm;
use crate::numeric;
use crate::system::SystemDef;
use crate::zerodyn::lifted_field;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 1.0;

/// Input as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    Constant(f64),
    /// Expression in the single symbol `t`.
    Expr(Expr),
}

impl InputSignal {
    /// A number gives a constant signal; anything else is parsed as an
    /// expression in `t`.
    pub fn parse(text: &str) -> Result<Self> {
        if let Ok(v) = text.trim().parse::<f64>() {
            return Ok(Self::Constant(v));
        }
        parse_expr(text, &SymbolTable::time_only()).map(Self::Expr)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        match self {
            Self::Constant(v) => Ok(*v),
            Self::Expr(e) => e.eval(&Point::new().with("t", t)),
        }
    }
}

impl std::fmt::Display for InputSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "{v}"),
            Self::Expr(e) => write!(f, "{e}"),
        }
    }
}

/// Uniformly sampled solution curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn with_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    /// CSV with header `t,<names>,u` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = ["t"].into_iter().chain(self.names.iter().map(String::as_str)).chain(["u"]).collect();
        w.write_record(&header).map_err(csv_err)?;
        for ((t, x), u) in self.times.iter().zip(&self.states).zip(&self.inputs) {
            let row: Vec<String> = std::iter::once(t).chain(x).chain([u]).map(|v| format!("{v:.16e}")).collect();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a CSV written by [`Trajectory::write_csv`]. The last column is
    /// the input; a file without a `u` column gets zero inputs.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Io("trajectory CSV must start with a `t` column".into()));
        }
        let has_u = header.last().map(String::as_str) == Some("u") && header.len() > 2;
        let n = header.len() - 1 - usize::from(has_u);
        let mut traj =
            Trajectory { names: header[1..=n].to_vec(), times: Vec::new(), states: Vec::new(), inputs: Vec::new() };
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Io(format!("row {}: {e}", i + 2)))?;
            if vals.len() != header.len() {
                return Err(Error::Io(format!("row {} has {} fields, expected {}", i + 2, vals.len(), header.len())));
            }
            traj.times.push(vals[0]);
            traj.states.push(vals[1..=n].to_vec());
            traj.inputs.push(if has_u { vals[n + 1] } else { 0.0 });
        }
        Ok(traj)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Number of uniform steps covering `[0, t_end]` with step at most `dt`.
fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::Precondition(format!("t_end must be at least dt, got {t_end}")));
    }
    Ok((t_end / dt - 1e-9).ceil().max(1.0) as usize)
}

/// Stamps the current time onto errors that carry one.
fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::SingularJacobian { det, point, time: None } => Error::SingularJacobian { det, point, time: Some(t) },
        other => other,
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Classical RK4 for `ẋ = field(x, u(t), t)`, input sampled at each stage.
pub fn integrate<F>(field: F, x0: &[f64], input: &InputSignal, t_end: f64, dt: f64) -> Result<Trajectory>
where
    F: Fn(&[f64], f64, f64) -> Result<Vec<f64>>,
{
    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let eval = |x: &[f64], t: f64| -> Result<Vec<f64>> { field(x, input.at(t)?, t).map_err(|e| at_time(e, t)) };

    let mut traj = Trajectory {
        names: Vec::new(),
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    traj.times.push(0.0);
    traj.states.push(x.clone());
    traj.inputs.push(input.at(0.0)?);
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = eval(&x, t)?;
        let k2 = eval(&axpy(&x, h / 2.0, &k1), t + h / 2.0)?;
        let k3 = eval(&axpy(&x, h / 2.0, &k2), t + h / 2.0)?;
        let k4 = eval(&axpy(&x, h, &k3), t + h)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = (k + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t_next });
        }
        traj.times.push(t_next);
        traj.states.push(x.clone());
        traj.inputs.push(input.at(t_next)?);
    }
    Ok(traj)
}

/// `ẋ = F(x, u)` with constant or time-varying `u`.
pub fn simulate_full(sys: &SystemDef, x0: &[f64], u: &InputSignal, t_end: f64, dt: f64) -> Result<Trajectory> {
    Ok(integrate(|x, u, _| sys.dynamics_at(x, u), x0, u, t_end, dt)?.with_names(&sys.states))
}

/// `ż = A z + b v` on the quotient.
pub fn simulate_linear(nf: &NormalForm, z0: &[f64], v: &InputSignal, t_end: f64, dt: f64) -> Result<Trajectory> {
    if z0.len() != nf.r {
        return Err(Error::Dimension(format!("quotient state has {} entries, expected {}", z0.len(), nf.r)));
    }
    let q = nf.quotient();
    let names: Vec<String> = (1..=nf.r).map(|i| format!("z{i}")).collect();
    Ok(integrate(|z, v, _| Ok(q.field(z, v)), z0, v, t_end, dt)?.with_names(&names))
}

/// `ẋ = f̃^H(x, v)`, driven by the linearised input `v`.
pub fn simulate_lifted(nf: &NormalForm, x0: &[f64], v: &InputSignal, t_end: f64, dt: f64) -> Result<Trajectory> {
    Ok(integrate(|x, v, _| lifted_field(nf, x, v), x0, v, t_end, dt)?.with_names(&nf.states))
}

/// `ẋ = f^Z(x, u)`.
pub fn simulate_zero(
    sys: &SystemDef,
    nf: &NormalForm,
    x0: &[f64],
    u: &InputSignal,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    Ok(integrate(|x, u, _| crate::zerodyn::zero_dynamics_at(sys, nf, x, u), x0, u, t_end, dt)?.with_names(&sys.states))
}

/// `max_t ‖Φ(x(t)) − z(t)‖∞` over matching samples.
pub fn projection_error(nf: &NormalForm, lifted: &Trajectory, quotient: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, z) in lifted.states.iter().zip(&quotient.states) {
        worst = worst.max(numeric::max_abs_diff(&nf.phi_at(x)?, z));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub input: String,
    pub t_end: f64,
    pub dt: f64,
    /// `max_t ‖Φ(γ^H(t)) − z(t)‖∞` for the lifted system.
    pub lifted_error: f64,
    /// Same, for the original system driven by `u = Ψ⁻¹(x, v)`.
    pub full_error: f64,
}

/// Integrates the lifted system, the original system under `u = Ψ⁻¹(x, v)`
/// and the quotient from `Φ(x0)`, and measures how far the projections of
/// the first two stray from the third.
pub fn verify_projection(
    sys: &SystemDef,
    nf: &NormalForm,
    x0: &[f64],
    v: &InputSignal,
    t_end: f64,
    dt: f64,
) -> Result<ProjectionReport> {
    let z0 = nf.phi_at(x0)?;
    let lifted = simulate_lifted(nf, x0, v, t_end, dt)?;
    let quotient = simulate_linear(nf, &z0, v, t_end, dt)?;
    let full = integrate(
        |x, v, _| {
            let u = nf.feedback.inverse(&nf.point(x), v)?;
            sys.dynamics_at(x, u)
        },
        x0,
        v,
        t_end,
        dt,
    )?;
    Ok(ProjectionReport {
        x0: x0.to_vec(),
        z0,
        input: v.to_string(),
        t_end,
        dt,
        lifted_error: projection_error(nf, &lifted, &quotient)?,
        full_error: projection_error(nf, &full, &quotient)?,
    })
}

/// Velocities of a sampled curve: central differences inside, second-order
/// one-sided differences at the ends.
pub fn sample_velocities(traj: &Trajectory) -> Vec<Vec<f64>> {
    let m = traj.len();
    let h = traj.dt();
    let y = |k: usize| DVector::from_column_slice(&traj.states[k]);
    (0..m)
        .map(|k| {
            let v = match (k, m) {
                (_, 0 | 1) => DVector::zeros(traj.states.first().map_or(0, Vec::len)),
                (_, 2) => (y(1) - y(0)) / h,
                (0, _) => (y(1) * 4.0 - y(0) * 3.0 - y(2)) / (2.0 * h),
                (k, m) if k == m - 1 => (y(k) * 3.0 - y(k - 1) * 4.0 + y(k - 2)) / (2.0 * h),
                (k, _) => (y(k + 1) - y(k - 1)) / (2.0 * h),
            };
            v.as_slice().to_vec()
        })
        .collect()
}

/// Horizontal lift of a sampled base curve through `x0`: integrates
/// `ẋ = Hor_x(γ̇(t))` with RK4 on the base curve's own time grid. Stages at
/// `t_k` use the sampled velocity there, midpoint stages use the secant
/// `(γ_{k+1} − γ_k)/h`.
pub fn lift_curve(nf: &NormalForm, base: &Trajectory, x0: &[f64]) -> Result<Trajectory> {
    if base.len() < 2 {
        return Err(Error::Precondition("base curve needs at least two samples".into()));
    }
    if base.states[0].len() != nf.r {
        return Err(Error::Dimension(format!(
            "base curve has {} coordinates, expected {}",
            base.states[0].len(),
            nf.r
        )));
    }
    let phi0 = nf.phi_at(x0)?;
    let gap = numeric::max_abs_diff(&phi0, &base.states[0]);
    if gap > 1e-6 {
        return Err(Error::Precondition(format!(
            "Φ(x0) = {phi0:?} differs from the base curve start {:?} by {gap:e}",
            base.states[0]
        )));
    }
    let vel = sample_velocities(base);
    let lift = |x: &[f64], y: &[f64], t: f64| -> Result<Vec<f64>> {
        crate::connection::connection_at(nf, x).and_then(|cp| cp.horizontal_lift(y)).map_err(|e| at_time(e, t))
    };
    let mut out = Trajectory {
        names: nf.states.clone(),
        times: base.times.clone(),
        states: vec![x0.to_vec()],
        inputs: base.inputs.clone(),
    };
    let mut x = x0.to_vec();
    for k in 0..base.len() - 1 {
        let (t, h) = (base.times[k], base.times[k + 1] - base.times[k]);
        let mid: Vec<f64> = base.states[k + 1].iter().zip(&base.states[k]).map(|(a, b)| (a - b) / h).collect();
        let k1 = lift(&x, &vel[k], t)?;
        let k2 = lift(&axpy(&x, h / 2.0, &k1), &mid, t + h / 2.0)?;
        let k3 = lift(&axpy(&x, h / 2.0, &k2), &mid, t + h / 2.0)?;
        let k4 = lift(&axpy(&x, h, &k3), &vel[k + 1], t + h)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: base.times[k + 1] });
        }
        out.states.push(x.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::relative_degree;
    use crate::system::parse_system;

    const EXAMPLE: &str = "states x1 x2 x3\ninput u\nf = [-x1, x1*x2, x2]\ng = [exp(x2), 1, 0]\nh = x3\ncomplement = [1 + x1 - exp(x2)]\n";

    fn pipeline() -> (SystemDef, NormalForm) {
        let sys = parse_system(EXAMPLE).unwrap();
        let rd = relative_degree(&sys, &[0.0; 3], 1e-9).unwrap();
        let nf = NormalForm::build(&sys, &rd).unwrap();
        (sys, nf)
    }

    fn decay(x0: f64, dt: f64) -> f64 {
        integrate(|x, _, _| Ok(vec![-x[0]]), &[x0], &InputSignal::Constant(0.0), 1.0, dt).unwrap().last()[0]
    }

    #[test]
    fn exponential_decay() {
        assert!((decay(1.0, 1e-3) - (-1.0f64).exp()).abs() <= 1e-9);
        let traj =
            integrate(|_, _, _| Ok(vec![0.0, 0.0]), &[1.5, -2.0], &InputSignal::Constant(0.0), 1.0, 0.1).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states.iter().all(|x| x == &[1.5, -2.0]));
    }

    #[test]
    fn fourth_order_convergence() {
        let e = (-1.0f64).exp();
        let ratio = (decay(1.0, 0.1) - e).abs() / (decay(1.0, 0.05) - e).abs();
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn time_reversal_on_linear_field() {
        let rot = |x: &[f64], _: f64, _: f64| Ok(vec![x[1], -x[0] - 0.3 * x[1]]);
        let fwd = integrate(rot, &[1.0, 0.5], &InputSignal::Constant(0.0), 1.0, 1e-3).unwrap();
        let back =
            integrate(|x, _, _| Ok(vec![-x[1], x[0] + 0.3 * x[1]]), fwd.last(), &InputSignal::Constant(0.0), 1.0, 1e-3)
                .unwrap();
        assert!(numeric::max_abs_diff(back.last(), &[1.0, 0.5]) <= 1e-8);
    }

    #[test]
    fn blow_up_is_reported() {
        let err =
            integrate(|x, _, _| Ok(vec![x[0] * x[0]]), &[1.0], &InputSignal::Constant(0.0), 2.0, 1e-2).unwrap_err();
        let Error::NonFinite { time } = err else { panic!("{err:?}") };
        assert!(time > 0.9 && time <= 2.0);
    }

    #[test]
    fn bad_steps() {
        let f = |_: &[f64], _: f64, _: f64| Ok(vec![0.0]);
        assert!(integrate(f, &[0.0], &InputSignal::Constant(0.0), 1.0, 0.0).is_err());
        assert!(integrate(f, &[0.0], &InputSignal::Constant(0.0), 1e-4, 1e-3).is_err());
    }

    #[test]
    fn input_signals() {
        assert_eq!(InputSignal::parse("2.5").unwrap(), InputSignal::Constant(2.5));
        let s = InputSignal::parse("sin(t)").unwrap();
        assert_eq!(s.at(0.5).unwrap(), 0.5f64.sin());
        assert!(InputSignal::parse("sin(x)").is_err());
        let traj = integrate(|_, u, _| Ok(vec![u]), &[0.0], &s, 1.0, 1e-3).unwrap();
        assert!((traj.last()[0] - (1.0 - 1.0f64.cos())).abs() < 1e-12);
        assert_eq!(traj.inputs[0], 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let traj = integrate(
            |x, u, _| Ok(vec![-x[0] + u, x[0]]),
            &[0.1, 1.0 / 3.0],
            &InputSignal::parse("cos(t)").unwrap(),
            0.05,
            0.01,
        )
        .unwrap()
        .with_names(&["a", "b"]);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,a,b,u\n"));
        assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), traj);
    }

    #[test]
    fn projection_of_example() {
        let (sys, nf) = pipeline();
        let v = InputSignal::parse("sin(t)").unwrap();
        let rep = verify_projection(&sys, &nf, &[0.5, 0.2, -0.1], &v, 1.0, 1e-3).unwrap();
        assert!(rep.lifted_error <= 1e-6 && rep.full_error <= 1e-6, "{rep:?}");
        assert_eq!(rep.z0, vec![-0.1, 0.2]);

        let rep = verify_projection(&sys, &nf, &[0.7, 0.0, 0.0], &InputSignal::Constant(0.0), 1.0, 1e-3).unwrap();
        assert!(rep.lifted_error <= 1e-9);
    }

    #[test]
    fn lifting_a_constant_curve() {
        let (_, nf) = pipeline();
        let base = Trajectory {
            names: vec!["z1".into(), "z2".into()],
            times: vec![0.0, 0.1, 0.2, 0.3],
            states: vec![vec![0.0, 0.2]; 4],
            inputs: vec![0.0; 4],
        };
        let lifted = lift_curve(&nf, &base, &[0.4, 0.2, 0.0]).unwrap();
        assert!(lifted.states.iter().all(|x| numeric::max_abs_diff(x, &[0.4, 0.2, 0.0]) < 1e-15));
        assert!(matches!(lift_curve(&nf, &base, &[0.4, 0.3, 0.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn lifting_the_quotient_trajectory() {
        let (_, nf) = pipeline();
        let v = InputSignal::parse("sin(t)").unwrap();
        let x0 = [0.5, 0.2, -0.1];
        let quotient = simulate_linear(&nf, &nf.phi_at(&x0).unwrap(), &v, 1.0, 1e-3).unwrap();
        let lifted = lift_curve(&nf, &quotient, &x0).unwrap();
        let direct = simulate_lifted(&nf, &x0, &v, 1.0, 1e-3).unwrap();
        let gap = lifted.states.iter().zip(&direct.states).fold(0.0f64, |m, (a, b)| m.max(numeric::max_abs_diff(a, b)));
        assert!(gap <= 1e-5, "gap {gap}");
        assert!(projection_error(&nf, &lifted, &quotient).unwrap() <= 1e-6);
    }
}
