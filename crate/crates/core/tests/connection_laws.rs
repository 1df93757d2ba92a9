mod common;

use fibrelin::connection::{connection_at, symbolic_lift_matrix, ConnectionPoint};
use fibrelin::normal_form::NormalForm;
use fibrelin::numeric::{eval_matrix, max_abs_diff, seeded, uniform_cube, uniform_in};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-10;

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

/// Right inverse, linearity, horizontality, exact and unique splitting at
/// `trials` seeded points of the normal form's sample box.
fn check_laws(nf: &NormalForm, trials: usize, seed: u64) {
    let (n, r) = (nf.n(), nf.r);
    let region = nf.region(2.0);
    let mut rng = seeded(seed);
    let mut checked = 0;
    for _ in 0..trials {
        let x = uniform_in(&mut rng, &region.lo, &region.hi);
        let cp = match connection_at(nf, &x) {
            Ok(cp) => cp,
            Err(fibrelin::Error::Domain { .. }) => continue,
            Err(e) => panic!("connection at {x:?}: {e}"),
        };
        assert!(cp.direct_sum_margin() > 1e-9, "H ⊕ V degenerate at {x:?}");

        let y1 = uniform_cube(&mut rng, r, 1.0);
        let y2 = uniform_cube(&mut rng, r, 1.0);
        let a: f64 = rng.gen_range(-2.0..=2.0);
        let h1 = cp.horizontal_lift(&y1).unwrap();
        let h2 = cp.horizontal_lift(&y2).unwrap();
        assert!(max_abs_diff(&cp.project(&h1), &y1) <= TOL, "TΦ∘Hor ≠ id at {x:?}");

        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + q).collect();
        let expect: Vec<f64> = h1.iter().zip(&h2).map(|(p, q)| a * p + q).collect();
        assert!(max_abs_diff(&cp.horizontal_lift(&combo).unwrap(), &expect) <= TOL);

        let rest = cp.jacobian.rows(r, n - r) * DVector::from_column_slice(&h1);
        assert!(rest.amax() <= TOL, "lift has a complementary component at {x:?}");

        let c = uniform_cube(&mut rng, n - r, 1.0);
        let vert = (&cp.v_basis * DVector::from_column_slice(&c)).as_slice().to_vec();
        assert!(max_abs_diff(&cp.project(&vert), &vec![0.0; r]) <= TOL, "V not in ker TΦ");
        let total = add(&h1, &vert);
        let (xh, xv) = cp.decompose(&total).unwrap();
        assert!(max_abs_diff(&add(&xh, &xv), &total) <= TOL);
        assert!(max_abs_diff(&xh, &h1) <= TOL && max_abs_diff(&xv, &vert) <= TOL);
        checked += 1;
    }
    assert!(checked * 10 >= trials * 9, "only {checked} of {trials} points evaluated");
}

#[test]
fn laws_hold_for_the_supplied_completion() {
    check_laws(&common::normal_form(&common::fixture()), 100, 1);
}

#[test]
fn laws_hold_for_the_heuristic_completion() {
    check_laws(&common::normal_form(&common::without_complement()), 100, 2);
}

#[test]
fn laws_hold_in_four_dimensions() {
    check_laws(&common::normal_form(&common::four_states()), 100, 3);
}

#[test]
fn symbolic_lift_agrees_with_numeric() {
    for sys in [common::fixture(), common::without_complement(), common::four_states()] {
        let nf = common::normal_form(&sys);
        let h = symbolic_lift_matrix(&nf).expect("n ≤ 4");
        let mut rng = seeded(7);
        let region = nf.region(2.0);
        for _ in 0..50 {
            let x = uniform_in(&mut rng, &region.lo, &region.hi);
            let y = uniform_cube(&mut rng, nf.r, 1.0);
            let m = eval_matrix(&h, &nf.point(&x)).unwrap();
            let sym = (m * DVector::from_column_slice(&y)).as_slice().to_vec();
            let num = connection_at(&nf, &x).unwrap().horizontal_lift(&y).unwrap();
            assert!(max_abs_diff(&sym, &num) <= TOL, "{}: {sym:?} vs {num:?}", sys.name);
        }
    }
}

#[test]
fn singular_jacobian_is_rejected() {
    let j = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]);
    let err = ConnectionPoint::from_jacobian(j, 2, &[0.0; 3]).unwrap_err();
    assert!(matches!(err, fibrelin::Error::SingularJacobian { .. }), "{err}");
}

fn well_conditioned() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|n| (Just(n), 1..n, prop::collection::vec(-1.0f64..=1.0, n * n)))
}

proptest! {
    #[test]
    fn laws_hold_for_random_jacobians((n, r, entries) in well_conditioned(), y in prop::collection::vec(-1.0f64..=1.0, 6)) {
        // Diagonal dominance keeps the matrix comfortably invertible.
        let j = DMatrix::from_row_slice(n, n, &entries) + DMatrix::identity(n, n) * (n as f64 + 1.0);
        let cp = ConnectionPoint::from_jacobian(j, r, &vec![0.0; n]).unwrap();
        let y = &y[..r];
        let h = cp.horizontal_lift(y).unwrap();
        prop_assert!(max_abs_diff(&cp.project(&h), y) <= TOL);
        let rest = cp.jacobian.rows(r, n - r) * DVector::from_column_slice(&h);
        prop_assert!(rest.amax() <= TOL);
        for k in 0..n - r {
            let col = cp.v_basis.column(k);
            prop_assert!((col.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(max_abs_diff(&cp.project(col.as_slice()), &vec![0.0; r]) <= TOL);
        }
        let mut basis = cp.h_basis.clone().resize_horizontally(n, 0.0);
        basis.columns_mut(r, n - r).copy_from(&cp.v_basis);
        prop_assert!(basis.determinant().abs() > 1e-9);
        let x: Vec<f64> = (0..n).map(|i| entries[i] * 3.0).collect();
        let (xh, xv) = cp.decompose(&x).unwrap();
        prop_assert!(max_abs_diff(&add(&xh, &xv), &x) <= TOL);
        prop_assert!(max_abs_diff(&cp.project(&xv), &vec![0.0; r]) <= TOL);
    }
}
