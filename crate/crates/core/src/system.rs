//! SISO affine control systems `ẋ = f(x) + g(x)u, y = h(x)` and the
//! line-oriented system file format.
//!
//! ```text
//! # comment
//! system "name"
//! states x1 x2 x3
//! input u
//! f = [-x1, x1*x2, x2]
//! g = [exp(x2), 1, 0]
//! h = x3
//! complement = [1 + x1 - exp(x2)]   # optional
//! point = [0, 0, 0]                 # optional, defaults to the origin
//! ```

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, format_list, jacobian, parse_expr, simplify, Expr, Point, SymbolTable};
use crate::numeric::{self, eval_matrix, eval_vector};

/// Validated affine control system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDef {
    pub name: String,
    pub states: Vec<String>,
    pub input: String,
    pub f: Vec<Expr>,
    pub g: Vec<Expr>,
    pub h: Expr,
    pub complement: Option<Vec<Expr>>,
    pub operating_point: Option<Vec<f64>>,
}

impl SystemDef {
    /// Builds and validates a system from parts.
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        input: impl Into<String>,
        f: Vec<Expr>,
        g: Vec<Expr>,
        h: Expr,
    ) -> Result<Self> {
        let sys =
            Self { name: name.into(), states, input: input.into(), f, g, h, complement: None, operating_point: None };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_complement(mut self, complement: Vec<Expr>) -> Result<Self> {
        self.complement = Some(complement);
        self.validate()?;
        Ok(self)
    }

    pub fn with_operating_point(mut self, point: Vec<f64>) -> Result<Self> {
        self.operating_point = Some(point);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn symbols(&self) -> SymbolTable {
        SymbolTable::new(self.states.clone(), Some(self.input.clone()), None)
    }

    /// The operating point, the origin when none was given.
    pub fn operating_point(&self) -> Vec<f64> {
        self.operating_point.clone().unwrap_or_else(|| vec![0.0; self.n()])
    }

    /// Bindings for a state vector.
    pub fn point(&self, x: &[f64]) -> Point {
        Point::from_slices(&self.states, x)
    }

    /// Bindings for a state vector and input value.
    pub fn point_with_input(&self, x: &[f64], u: f64) -> Point {
        self.point(x).with(&self.input, u)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::Dimension(format!("need at least 2 states, got {n}")));
        }
        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].contains(s) {
                return Err(Error::InvalidSystem(format!("state `{s}` declared twice")));
            }
        }
        if self.states.contains(&self.input) {
            return Err(Error::InvalidSystem(format!("input `{}` is also a state", self.input)));
        }
        if self.f.len() != n {
            return Err(Error::Dimension(format!("f has {} components but there are {n} states", self.f.len())));
        }
        if self.g.len() != n {
            return Err(Error::Dimension(format!("g has {} components but there are {n} states", self.g.len())));
        }
        if let Some(p) = &self.operating_point {
            if p.len() != n {
                return Err(Error::Dimension(format!("point has {} entries but there are {n} states", p.len())));
            }
        }
        let mut fields: Vec<(String, &Expr)> = Vec::new();
        fields.extend(self.f.iter().enumerate().map(|(i, e)| (format!("f[{}]", i + 1), e)));
        fields.extend(self.g.iter().enumerate().map(|(i, e)| (format!("g[{}]", i + 1), e)));
        fields.push(("h".into(), &self.h));
        if let Some(c) = &self.complement {
            if c.len() >= n {
                return Err(Error::Dimension(format!("complement has {} entries, must be fewer than {n}", c.len())));
            }
            fields.extend(c.iter().enumerate().map(|(i, e)| (format!("complement[{}]", i + 1), e)));
        }
        for (label, e) in fields {
            for sym in e.free_symbols() {
                if sym == self.input {
                    return Err(Error::InvalidSystem(format!("input `{sym}` appears in {label}")));
                }
                if !self.states.contains(&sym) {
                    return Err(Error::InvalidSystem(format!("`{sym}` in {label} is not a state")));
                }
            }
        }
        Ok(())
    }

    /// Component-wise `f_i + g_i·u`, simplified.
    pub fn total_dynamics(&self) -> Vec<Expr> {
        let u = Expr::var(&self.input);
        self.f
            .iter()
            .zip(&self.g)
            .map(|(fi, gi)| simplify(&Expr::Add(vec![fi.clone(), Expr::Mul(vec![gi.clone(), u.clone()])])))
            .collect()
    }

    /// Numeric `F(x, u) = f(x) + g(x)u`.
    pub fn dynamics_at(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        let at = self.point(x);
        let f = expr::eval_all(&self.f, &at)?;
        let g = expr::eval_all(&self.g, &at)?;
        Ok(f.iter().zip(&g).map(|(fi, gi)| fi + gi * u).collect())
    }

    /// Serializes back to the system file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "system \"{}\"", self.name);
        let _ = writeln!(out, "states {}", self.states.join(" "));
        let _ = writeln!(out, "input {}", self.input);
        let _ = writeln!(out, "f = {}", format_list(&self.f));
        let _ = writeln!(out, "g = {}", format_list(&self.g));
        let _ = writeln!(out, "h = {}", self.h);
        if let Some(c) = &self.complement {
            let _ = writeln!(out, "complement = {}", format_list(c));
        }
        if let Some(p) = &self.operating_point {
            let vals: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "point = [{}]", vals.join(", "));
        }
        out
    }
}

/// A logical statement of the file with the source position of every character.
struct Statement {
    text: String,
    positions: Vec<(usize, usize)>,
}

impl Statement {
    fn pos(&self, byte_idx: usize) -> (usize, usize) {
        let char_idx = self.text[..byte_idx.min(self.text.len())].chars().count();
        self.positions.get(char_idx).or(self.positions.last()).copied().unwrap_or((1, 1))
    }
}

fn statements(text: &str) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    let mut cur = Statement { text: String::new(), positions: Vec::new() };
    let mut depth: i32 = 0;
    let mut open_at = (1, 1);
    for (li, line) in text.lines().enumerate() {
        let mut in_quote = false;
        for (ci, ch) in line.chars().enumerate() {
            if ch == '"' {
                in_quote = !in_quote;
            }
            if ch == '#' && !in_quote {
                break;
            }
            match ch {
                '[' => {
                    if depth == 0 {
                        open_at = (li + 1, ci + 1);
                    }
                    depth += 1;
                }
                ']' => depth -= 1,
                _ => {}
            }
            if depth < 0 {
                return Err(Error::Syntax { line: li + 1, column: ci + 1, message: "unmatched `]`".into() });
            }
            cur.text.push(ch);
            cur.positions.push((li + 1, ci + 1));
        }
        if depth == 0 {
            if !cur.text.trim().is_empty() {
                out.push(cur);
            }
            cur = Statement { text: String::new(), positions: Vec::new() };
        } else {
            cur.text.push(' ');
            cur.positions.push((li + 1, line.chars().count() + 1));
        }
    }
    if depth != 0 {
        return Err(Error::Syntax { line: open_at.0, column: open_at.1, message: "unclosed `[`".into() });
    }
    Ok(out)
}

fn parse_at(stmt: &Statement, start: usize, end: usize, table: &SymbolTable) -> Result<Expr> {
    let src = &stmt.text[start..end];
    parse_expr(src, table).map_err(|e| {
        let col_in_src = e.position().map_or(1, |(_, c)| c);
        let byte = src.char_indices().nth(col_in_src.saturating_sub(1)).map_or(src.len(), |(b, _)| b);
        let (line, column) = stmt.pos(start + byte);
        e.relocate(line, column)
    })
}

/// Splits `[a, b, c]` at top-level commas; returns byte ranges into `stmt.text`.
fn list_ranges(stmt: &Statement, start: usize) -> Result<Vec<(usize, usize)>> {
    let text = &stmt.text;
    let rel = text[start..].trim_start();
    let open = start + (text[start..].len() - rel.len());
    if !rel.starts_with('[') {
        let (line, column) = stmt.pos(open);
        return Err(Error::Syntax { line, column, message: "expected `[`".into() });
    }
    let close = text.rfind(']').expect("balanced brackets");
    if !text[close + 1..].trim().is_empty() {
        let (line, column) = stmt.pos(close + 1);
        return Err(Error::Syntax { line, column, message: "unexpected text after `]`".into() });
    }
    let mut ranges = Vec::new();
    let mut depth = 0;
    let mut item_start = open + 1;
    for (i, ch) in text[open + 1..close].char_indices() {
        let i = open + 1 + i;
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                ranges.push((item_start, i));
                item_start = i + 1;
            }
            _ => {}
        }
    }
    if !text[item_start..close].trim().is_empty() || !ranges.is_empty() {
        ranges.push((item_start, close));
    }
    for &(a, b) in &ranges {
        if text[a..b].trim().is_empty() {
            let (line, column) = stmt.pos(a);
            return Err(Error::Syntax { line, column, message: "empty list entry".into() });
        }
    }
    Ok(ranges)
}

/// Parses and validates a system file.
pub fn parse_system(text: &str) -> Result<SystemDef> {
    let mut name: Option<String> = None;
    let mut states: Option<Vec<String>> = None;
    let mut input: Option<String> = None;
    let mut pending: Vec<(String, Statement, usize)> = Vec::new();

    for stmt in statements(text)? {
        let trimmed = stmt.text.trim_start();
        let lead = stmt.text.len() - trimmed.len();
        let (line, col) = stmt.pos(lead);
        let keyword: String = trimmed.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        let rest_start = lead + keyword.len();
        let rest = stmt.text[rest_start..].trim();
        match keyword.as_str() {
            "system" => {
                let quoted = rest.strip_prefix('"').and_then(|r| r.strip_suffix('"')).ok_or_else(|| Error::Syntax {
                    line,
                    column: col,
                    message: "expected system \"<name>\"".into(),
                })?;
                name = Some(quoted.to_string());
            }
            "states" => {
                let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                if names.is_empty() {
                    return Err(Error::Syntax {
                        line,
                        column: col,
                        message: "`states` needs at least one name".into(),
                    });
                }
                for n in &names {
                    if !n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                        || !n.chars().all(|c| c.is_alphanumeric() || c == '_')
                        || expr::Func::from_name(n).is_some()
                    {
                        return Err(Error::Syntax { line, column: col, message: format!("invalid state name `{n}`") });
                    }
                }
                states = Some(names);
            }
            "input" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 1 {
                    return Err(Error::Syntax {
                        line,
                        column: col,
                        message: "`input` takes exactly one symbol".into(),
                    });
                }
                input = Some(parts[0].to_string());
            }
            "f" | "g" | "h" | "complement" | "point" => {
                let eq = stmt.text[rest_start..].find('=').map(|i| rest_start + i);
                match eq {
                    Some(eq) if stmt.text[rest_start..eq].trim().is_empty() => {
                        pending.push((keyword, stmt, eq + 1));
                    }
                    _ => {
                        return Err(Error::Syntax {
                            line,
                            column: col,
                            message: format!("expected `{keyword} = ...`"),
                        });
                    }
                }
            }
            _ => {
                return Err(Error::Syntax { line, column: col, message: format!("unknown statement `{keyword}`") });
            }
        }
    }

    let states = states.ok_or_else(|| Error::InvalidSystem("missing `states` line".into()))?;
    let input = input.ok_or_else(|| Error::InvalidSystem("missing `input` line".into()))?;
    let table = SymbolTable::new(states.clone(), Some(input.clone()), None);

    let mut f = None;
    let mut g = None;
    let mut h = None;
    let mut complement = None;
    let mut point = None;
    for (key, stmt, start) in &pending {
        match key.as_str() {
            "h" => h = Some(parse_at(stmt, *start, stmt.text.len(), &table)?),
            "point" => {
                let consts = SymbolTable::with_states::<&str>(&[]);
                let mut vals = Vec::new();
                for (a, b) in list_ranges(stmt, *start)? {
                    let e = parse_at(stmt, a, b, &consts)?;
                    vals.push(e.eval(&Point::new())?);
                }
                point = Some(vals);
            }
            _ => {
                let items = list_ranges(stmt, *start)?
                    .into_iter()
                    .map(|(a, b)| parse_at(stmt, a, b, &table))
                    .collect::<Result<Vec<_>>>()?;
                match key.as_str() {
                    "f" => f = Some(items),
                    "g" => g = Some(items),
                    _ => complement = Some(items),
                }
            }
        }
    }

    let sys = SystemDef {
        name: name.unwrap_or_else(|| "system".into()),
        states,
        input,
        f: f.ok_or_else(|| Error::InvalidSystem("missing `f = [...]`".into()))?,
        g: g.ok_or_else(|| Error::InvalidSystem("missing `g = [...]`".into()))?,
        h: h.ok_or_else(|| Error::InvalidSystem("missing `h = ...`".into()))?,
        complement,
        operating_point: point,
    };
    sys.validate()?;
    Ok(sys)
}

/// Settings for sampling fibres `Φ(x) = z` in a projectability check.
#[derive(Debug, Clone)]
pub struct FibreSampler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Newton starts per target.
    pub starts: usize,
    pub seed: u64,
    /// Two points are on the same fibre when `‖Φ(x) − Φ(x′)‖∞` is below this.
    pub pair_tol: f64,
    /// Allowed disagreement of `TΦ·X` across a fibre.
    pub compare_tol: f64,
    pub max_newton_iter: usize,
}

impl FibreSampler {
    pub fn cube(n: usize, half: f64, seed: u64) -> Self {
        Self {
            lo: vec![-half; n],
            hi: vec![half; n],
            starts: 8,
            seed,
            pair_tol: 1e-9,
            compare_tol: 1e-7,
            max_newton_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Projectability {
    Projectable {
        fibre_points: usize,
        max_discrepancy: f64,
        /// `TΦ·X` at the first point of each target fibre.
        projections: Vec<Vec<f64>>,
    },
    NotProjectable {
        x: Vec<f64>,
        x_prime: Vec<f64>,
        projected: Vec<f64>,
        projected_prime: Vec<f64>,
        discrepancy: f64,
    },
}

/// Solves `Φ(x) = target` from `start` by damped minimum-norm Gauss–Newton.
pub fn solve_on_fibre(
    phi: &[Expr],
    phi_jac: &[Vec<Expr>],
    states: &[String],
    target: &[f64],
    start: &[f64],
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut x = DVector::from_column_slice(start);
    let z = DVector::from_column_slice(target);
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(eval_vector(phi, &Point::from_slices(states, x.as_slice()))? - &z)
    };
    let mut res = residual(&x)?;
    for _ in 0..max_iter {
        if res.amax() <= 1e-14 {
            break;
        }
        let jac: DMatrix<f64> = eval_matrix(phi_jac, &Point::from_slices(states, x.as_slice()))?;
        let gram = &jac * jac.transpose();
        let Some(sol) = gram.lu().solve(&res) else { break };
        let step = jac.transpose() * sol;
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &x - &step * alpha;
            if let Ok(r) = residual(&cand) {
                if r.norm() < res.norm() {
                    x = cand;
                    res = r;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(x.as_slice().to_vec())
}

/// Checks that `TΦ·X` is constant along fibres of `Φ`.
///
/// For each target `z` (or, when `targets` is empty, `Φ` of a few random
/// points), points with `Φ(x) = z` are found from several random starts and
/// `TΦ(x)·X(x)` is compared across them.
pub fn is_projectable<F>(
    field: F,
    phi: &[Expr],
    states: &[String],
    targets: &[Vec<f64>],
    sampler: &FibreSampler,
) -> Result<Projectability>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let phi_jac = jacobian(phi, states);
    let mut rng = numeric::seeded(sampler.seed);
    let targets: Vec<Vec<f64>> = if targets.is_empty() {
        (0..4)
            .map(|_| {
                let x = numeric::uniform_in(&mut rng, &sampler.lo, &sampler.hi);
                expr::eval_all(phi, &Point::from_slices(states, &x))
            })
            .collect::<Result<_>>()?
    } else {
        targets.to_vec()
    };

    let mut total_points = 0;
    let mut max_discrepancy: f64 = 0.0;
    let mut projections = Vec::new();
    for z in &targets {
        let mut fibre: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for _ in 0..sampler.starts {
            let start = numeric::uniform_in(&mut rng, &sampler.lo, &sampler.hi);
            let Ok(x) = solve_on_fibre(phi, &phi_jac, states, z, &start, sampler.max_newton_iter) else {
                continue;
            };
            let at = Point::from_slices(states, &x);
            let Ok(fx) = expr::eval_all(phi, &at) else { continue };
            if numeric::max_abs_diff(&fx, z) > sampler.pair_tol / 2.0 {
                continue;
            }
            if fibre.iter().any(|(y, _)| numeric::max_abs_diff(y, &x) < 1e-6) {
                continue;
            }
            let Ok(xv) = field(&x) else { continue };
            let jac = eval_matrix(&phi_jac, &at)?;
            let proj = (jac * DVector::from_vec(xv)).as_slice().to_vec();
            fibre.push((x, proj));
        }
        if fibre.len() < 2 {
            return Err(Error::FibreSampling(format!(
                "found {} distinct point(s) on the fibre over {z:?}",
                fibre.len()
            )));
        }
        let (x0, p0) = &fibre[0];
        for (x, p) in &fibre[1..] {
            let d = numeric::max_abs_diff(p0, p);
            if d > sampler.compare_tol {
                return Ok(Projectability::NotProjectable {
                    x: x0.clone(),
                    x_prime: x.clone(),
                    projected: p0.clone(),
                    projected_prime: p.clone(),
                    discrepancy: d,
                });
            }
            max_discrepancy = max_discrepancy.max(d);
        }
        total_points += fibre.len();
        projections.push(p0.clone());
    }
    Ok(Projectability::Projectable { fibre_points: total_points, max_discrepancy, projections })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"
# Three-state example with relative degree two
system "isidori"
states x1 x2 x3
input u
f = [-x1, x1*x2, x2]
g = [exp(x2), 1, 0]
h = x3
complement = [1 + x1 - exp(x2)]
"#;

    #[test]
    fn parses_example() {
        let sys = parse_system(EXAMPLE).unwrap();
        assert_eq!(sys.n(), 3);
        assert_eq!(sys.name, "isidori");
        assert_eq!(sys.h, Expr::var("x3"));
        assert_eq!(sys.complement.as_ref().unwrap().len(), 1);
        assert_eq!(sys.operating_point(), vec![0.0; 3]);
    }

    #[test]
    fn total_dynamics_components() {
        let sys = parse_system(EXAMPLE).unwrap();
        let fx = sys.total_dynamics();
        assert_eq!(fx[0].to_string(), "-x1 + exp(x2)*u");
        assert_eq!(fx[1].to_string(), "x1*x2 + u");
        assert_eq!(fx[2].to_string(), "x2");
    }

    #[test]
    fn zero_input_field_returns_drift() {
        let sys = parse_system("states a b\ninput u\nf = [b, -a]\ng = [0, 0]\nh = a").unwrap();
        assert_eq!(sys.total_dynamics(), sys.f);
    }

    #[test]
    fn dimension_mismatch() {
        let err = parse_system("states x1 x2 x3\ninput u\nf = [x1, x2]\ng = [0, 0, 1]\nh = x1").unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err:?}");
    }

    #[test]
    fn complement_is_optional() {
        let text = EXAMPLE.replace("complement = [1 + x1 - exp(x2)]", "");
        assert_eq!(parse_system(&text).unwrap().complement, None);
    }

    #[test]
    fn input_inside_fields_is_rejected() {
        let err = parse_system("states x1 x2\ninput u\nf = [x2, u]\ng = [0, 1]\nh = x1").unwrap_err();
        assert!(matches!(err, Error::InvalidSystem(ref m) if m.contains("f[2]")), "{err:?}");
    }

    #[test]
    fn errors_carry_file_positions() {
        let err = parse_system("states x1 x2\ninput u\nf = [x2,\n  y]\ng = [0, 1]\nh = x1").unwrap_err();
        assert_eq!(err, Error::Undeclared { name: "y".into(), line: 4, column: 3 });
        let err = parse_system("states x1 x2\ninput u\nf = [x2, x1 +* 2]\ng = [0, 1]\nh = x1").unwrap_err();
        assert_eq!(err.position(), Some((3, 14)));
        let err = parse_system("states x1 x2\nbogus\n").unwrap_err();
        assert_eq!(err.position(), Some((2, 1)));
    }

    #[test]
    fn serialization_roundtrip() {
        let sys = parse_system(EXAMPLE).unwrap().with_operating_point(vec![0.5, 0.0, -1.0]).unwrap();
        let again = parse_system(&sys.to_text()).unwrap();
        assert_eq!(again, sys);
    }

    #[test]
    fn drift_is_projectable_for_fixed_feedback_input() {
        // ẋ = F(x, u) with u chosen so that v = α + βu is fixed projects to the
        // linear field (z2, v) over Φ = (x3, x2).
        let sys = parse_system(EXAMPLE).unwrap();
        let fx = sys.total_dynamics();
        let v = 0.4;
        let field = |x: &[f64]| {
            let u = v - x[0] * x[1];
            expr::eval_all(&fx, &sys.point_with_input(x, u))
        };
        let phi = vec![Expr::var("x3"), Expr::var("x2")];
        let verdict =
            is_projectable(field, &phi, &sys.states, &[vec![0.3, -0.7]], &FibreSampler::cube(3, 2.0, 7)).unwrap();
        match verdict {
            Projectability::Projectable { projections, .. } => {
                assert!((projections[0][0] - (-0.7)).abs() < 1e-9);
                assert!((projections[0][1] - v).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixed_u_drift_is_not_projectable() {
        let sys = parse_system(EXAMPLE).unwrap();
        let fx = sys.total_dynamics();
        let field = |x: &[f64]| expr::eval_all(&fx, &sys.point_with_input(x, 0.4));
        let phi = vec![Expr::var("x3"), Expr::var("x2")];
        let verdict =
            is_projectable(field, &phi, &sys.states, &[vec![0.3, -0.7]], &FibreSampler::cube(3, 2.0, 7)).unwrap();
        assert!(matches!(verdict, Projectability::NotProjectable { .. }));
    }
}
