//! The zero-dynamics field f^Z = F − lifted dynamics, its restriction to the
//! zero fibre and a numeric check that it is vertical.

use fibrelin::lie::relative_degree;
use fibrelin::normal_form::NormalForm;
use fibrelin::system::parse_system;
use fibrelin::zerodyn::{restrict_to_zero_fibre, zero_dynamics_at, zero_dynamics_symbolic};

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let nf = NormalForm::build(&sys, &relative_degree(&sys, &[0.0; 3], 1e-9)?)?;

    let fz = zero_dynamics_symbolic(&sys, &nf).expect("three states");
    println!("f^Z = [{}]", fz.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "));

    let r = restrict_to_zero_fibre(&sys, &nf, &fz)?;
    for (s, e) in &r.constraints {
        println!("on the zero fibre {s} = {e}");
    }
    for (s, e) in r.free_states.iter().zip(&r.state_field) {
        println!("  d{s}/dt = {e}");
    }

    let x = [0.7, -1.1, 0.4];
    let v = zero_dynamics_at(&sys, &nf, &x, 0.3)?;
    println!("f^Z({x:?}, 0.3) = {v:?}, TΦ·f^Z = {:?}", nf.project(&x, &v)?);
    Ok(())
}
