mod common;

use fibrelin::expr::eval_all;
use fibrelin::normal_form::NormalForm;
use fibrelin::numeric::{max_abs, max_abs_diff, seeded, uniform_in};
use fibrelin::sim::{simulate_zero, InputSignal};
use fibrelin::system::SystemDef;
use fibrelin::zerodyn::{
    compare_with_constrained_definition, lifted_dynamics, restrict_to_zero_fibre, zero_dynamics_at,
    zero_dynamics_symbolic,
};
use rand::Rng;

fn systems() -> Vec<(SystemDef, NormalForm)> {
    [common::fixture(), common::without_complement(), common::four_states()]
        .into_iter()
        .map(|s| {
            let nf = common::normal_form(&s);
            (s, nf)
        })
        .collect()
}

#[test]
fn zero_dynamics_are_vertical() {
    for (sys, nf) in systems() {
        let region = nf.region(2.0);
        let mut rng = seeded(11);
        for _ in 0..100 {
            let x = uniform_in(&mut rng, &region.lo, &region.hi);
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let fz = zero_dynamics_at(&sys, &nf, &x, u).unwrap();
            let tphi = nf.project(&x, &fz).unwrap();
            assert!(max_abs(&tphi) <= 1e-9, "{}: TΦ·f^Z = {tphi:?} at {x:?}", sys.name);
        }
    }
}

#[test]
fn decomposition_recovers_the_full_field() {
    for (sys, nf) in systems() {
        let region = nf.region(2.0);
        let mut rng = seeded(12);
        for _ in 0..50 {
            let x = uniform_in(&mut rng, &region.lo, &region.hi);
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let total = sys.dynamics_at(&x, u).unwrap();
            let lifted = lifted_dynamics(&nf, &x, u).unwrap();
            let fz = zero_dynamics_at(&sys, &nf, &x, u).unwrap();
            let sum: Vec<f64> = lifted.iter().zip(&fz).map(|(a, b)| a + b).collect();
            assert!(max_abs_diff(&sum, &total) <= 1e-10);
            // The lifted part projects onto the quotient field.
            let z = nf.phi_at(&x).unwrap();
            let v = nf.feedback.value(&nf.point(&x), u).unwrap();
            let q = nf.quotient().field(&z, v);
            assert!(max_abs_diff(&nf.project(&x, &lifted).unwrap(), &q) <= 1e-9);
        }
    }
}

#[test]
fn symbolic_field_matches_numeric_field() {
    for (sys, nf) in systems() {
        let fz = zero_dynamics_symbolic(&sys, &nf).unwrap();
        let region = nf.region(2.0);
        let mut rng = seeded(13);
        for _ in 0..100 {
            let x = uniform_in(&mut rng, &region.lo, &region.hi);
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let sym = eval_all(&fz, &sys.point_with_input(&x, u)).unwrap();
            let num = zero_dynamics_at(&sys, &nf, &x, u).unwrap();
            assert!(max_abs_diff(&sym, &num) <= 1e-9, "{}: {sym:?} vs {num:?}", sys.name);
        }
    }
}

#[test]
fn fibres_are_invariant_under_the_zero_dynamics() {
    for (sys, nf) in systems() {
        let mut rng = seeded(14);
        for _ in 0..5 {
            let x0 = uniform_in(&mut rng, &vec![-0.5; sys.n()], &vec![0.5; sys.n()]);
            let u = InputSignal::parse("0.5*cos(3*t)").unwrap();
            let traj = simulate_zero(&sys, &nf, &x0, &u, 1.0, 1e-3).unwrap();
            let phi0 = nf.phi_at(&x0).unwrap();
            for x in &traj.states {
                assert!(max_abs_diff(&nf.phi_at(x).unwrap(), &phi0) <= 1e-6, "{}", sys.name);
            }
        }
    }
}

#[test]
fn restriction_to_the_zero_fibre() {
    for sys in [common::fixture(), common::without_complement()] {
        let nf = common::normal_form(&sys);
        let fz = zero_dynamics_symbolic(&sys, &nf).unwrap();
        let r = restrict_to_zero_fibre(&sys, &nf, &fz).unwrap();
        assert_eq!(r.free_states, ["x1"]);
        assert_eq!(r.state_field.iter().map(ToString::to_string).collect::<Vec<_>>(), ["-x1"]);
    }

    let sys = common::four_states();
    let nf = common::normal_form(&sys);
    let r = restrict_to_zero_fibre(&sys, &nf, &zero_dynamics_symbolic(&sys, &nf).unwrap()).unwrap();
    assert_eq!(r.free_states, ["x2", "x4"]);
    let x = r.embed(&sys.states, &[0.7, -0.3]).unwrap();
    assert!(max_abs(&nf.phi_at(&x).unwrap()) <= 1e-12);
}

#[test]
fn closed_loop_agrees_with_restricted_dynamics() {
    for sys in [common::fixture(), common::without_complement()] {
        let nf = common::normal_form(&sys);
        let r = restrict_to_zero_fibre(&sys, &nf, &zero_dynamics_symbolic(&sys, &nf).unwrap()).unwrap();
        let cmp = compare_with_constrained_definition(&sys, &nf, &r, &[1.0, 0.0, 0.0], 1.0, 1e-3).unwrap();
        let expect = (-1.0f64).exp();
        assert!((cmp.closed_loop_final[0] - expect).abs() <= 1e-6);
        assert!((cmp.restricted_final[0] - expect).abs() <= 1e-6);
        assert!(cmp.max_discrepancy <= 1e-6 && cmp.warnings.is_empty());
    }
}

#[test]
fn comparison_requires_a_point_on_the_zero_fibre() {
    let sys = common::fixture();
    let nf = common::normal_form(&sys);
    let r = restrict_to_zero_fibre(&sys, &nf, &zero_dynamics_symbolic(&sys, &nf).unwrap()).unwrap();
    let err = compare_with_constrained_definition(&sys, &nf, &r, &[1.0, 0.1, 0.0], 1.0, 1e-3).unwrap_err();
    assert!(matches!(err, fibrelin::Error::Precondition(_)), "{err}");
}
