//! The connection prescribed by the complementary coordinates.
//!
//! At a point `x` the Jacobian `J` of `Λ = (Φ, λ_{r+1}, ..., λ_n)` splits
//! the tangent space: the vertical subspace is `ker TΦ` (the last `n − r`
//! columns of `J⁻¹`) and the horizontal subspace is the common kernel of
//! `dλ_{r+1}, ..., dλ_n` (the first `r` columns). The horizontal lift of a
//! base vector `Y` is the unique `X` with `J·X = (Y, 0)`.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::expr::{normalize, simplify, Expr};
use crate::normal_form::{NormalForm, DET_TOL};
use crate::numeric;

/// Largest state dimension for which the symbolic inverse of `JΛ` is formed.
pub const SYMBOLIC_MAX_DIM: usize = 4;

#[derive(Debug, Clone)]
pub struct ConnectionPoint {
    pub point: Vec<f64>,
    pub r: usize,
    pub jacobian: DMatrix<f64>,
    pub det: f64,
    lu: LU<f64, Dyn, Dyn>,
    /// `n × (n − r)`, columns span `ker TΦ`.
    pub v_basis: DMatrix<f64>,
    /// `n × r`, columns annihilated by every `dλ_j`, `j > r`.
    pub h_basis: DMatrix<f64>,
}

/// Scales `col` to unit norm with its first nonzero entry positive.
fn canonical(mut col: DVector<f64>) -> DVector<f64> {
    let norm = col.norm();
    if norm > 0.0 {
        col /= norm;
    }
    if let Some(first) = col.iter().find(|v| v.abs() > 1e-14) {
        if *first < 0.0 {
            col = -col;
        }
    }
    col
}

/// `|det J| ≤ 1e-9 · max row norm`.
fn is_singular(j: &DMatrix<f64>, det: f64) -> bool {
    let scale = j.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    !det.is_finite() || det.abs() <= DET_TOL * scale.max(f64::MIN_POSITIVE)
}

impl ConnectionPoint {
    /// Builds the connection from a numeric Jacobian of `Λ`.
    pub fn from_jacobian(jacobian: DMatrix<f64>, r: usize, point: &[f64]) -> Result<Self> {
        let n = jacobian.nrows();
        assert!(jacobian.is_square() && r <= n, "Jacobian must be n × n with r ≤ n");
        let lu = jacobian.clone().lu();
        let det = lu.determinant();
        if is_singular(&jacobian, det) {
            return Err(Error::SingularJacobian { det, point: point.to_vec(), time: None });
        }
        let column = |k: usize| -> Result<DVector<f64>> {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            lu.solve(&e).map(canonical).ok_or(Error::SingularJacobian { det, point: point.to_vec(), time: None })
        };
        let mut h_basis = DMatrix::zeros(n, r);
        for k in 0..r {
            h_basis.set_column(k, &column(k)?);
        }
        let mut v_basis = DMatrix::zeros(n, n - r);
        for k in r..n {
            v_basis.set_column(k - r, &column(k)?);
        }
        Ok(Self { point: point.to_vec(), r, jacobian, det, lu, v_basis, h_basis })
    }

    pub fn n(&self) -> usize {
        self.jacobian.nrows()
    }

    /// `TΦ`, the first `r` rows of the Jacobian.
    pub fn t_phi(&self) -> DMatrix<f64> {
        self.jacobian.rows(0, self.r).into_owned()
    }

    /// `TΦ·X`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (self.t_phi() * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// The unique horizontal `X` with `TΦ·X = Y`.
    pub fn horizontal_lift(&self, y: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(y.len(), self.r, "base vector must have r components");
        let mut rhs = DVector::zeros(self.n());
        rhs.rows_mut(0, self.r).copy_from_slice(y);
        self.lu.solve(&rhs).map(|x| x.as_slice().to_vec()).ok_or(Error::SingularJacobian {
            det: self.det,
            point: self.point.clone(),
            time: None,
        })
    }

    /// Splits `X` into horizontal and vertical parts; `X_h + X_v = X`.
    pub fn decompose(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let xh = self.horizontal_lift(&self.project(x))?;
        let xv = x.iter().zip(&xh).map(|(a, b)| a - b).collect();
        Ok((xh, xv))
    }

    /// Smallest singular value of `[H_basis | V_basis]`; positive when the
    /// two subspaces are complementary.
    pub fn direct_sum_margin(&self) -> f64 {
        let mut m = DMatrix::zeros(self.n(), self.n());
        m.columns_mut(0, self.r).copy_from(&self.h_basis);
        m.columns_mut(self.r, self.n() - self.r).copy_from(&self.v_basis);
        numeric::min_singular_value(&m)
    }
}

pub fn connection_at(nf: &NormalForm, x: &[f64]) -> Result<ConnectionPoint> {
    ConnectionPoint::from_jacobian(nf.jacobian_at(x)?, nf.r, x)
}

/// Laplace expansion along the first row; literal zeros are skipped.
fn symbolic_det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut terms = Vec::new();
    for j in 0..n {
        if m[0][j].is_literal_zero() {
            continue;
        }
        let minor = minor(m, 0, j);
        let term = Expr::Mul(vec![m[0][j].clone(), symbolic_det(&minor)]);
        terms.push(if j % 2 == 0 { term } else { term.neg() });
    }
    simplify(&Expr::sum(terms))
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// `n × r` matrix `H(x)` with `Hor_x(Y) = H(x)·Y`, from the first `r`
/// columns of `adj(JΛ)/det JΛ`. `None` when `n` exceeds [`SYMBOLIC_MAX_DIM`].
pub fn symbolic_lift_matrix(nf: &NormalForm) -> Option<Vec<Vec<Expr>>> {
    let n = nf.n();
    if n > SYMBOLIC_MAX_DIM {
        return None;
    }
    let j = &nf.jacobian;
    let det = normalize(&symbolic_det(j));
    let mut h = vec![Vec::with_capacity(nf.r); n];
    for (i, row) in h.iter_mut().enumerate() {
        for k in 0..nf.r {
            // (J⁻¹)_{ik} = (−1)^{i+k} M_{ki} / det
            let cof = if n == 1 { Expr::one() } else { symbolic_det(&minor(j, k, i)) };
            let cof = if (i + k) % 2 == 0 { cof } else { cof.neg() };
            row.push(normalize(&cof.div(det.clone())));
        }
    }
    Some(h)
}
