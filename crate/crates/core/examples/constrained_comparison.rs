//! On the zero fibre, the output-zeroing closed loop and the restricted zero
//! dynamics trace the same curve x1(t) = e^{−t}.

use fibrelin::lie::relative_degree;
use fibrelin::normal_form::NormalForm;
use fibrelin::system::parse_system;
use fibrelin::zerodyn::{compare_with_constrained_definition, restrict_to_zero_fibre, zero_dynamics_symbolic};

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let nf = NormalForm::build(&sys, &relative_degree(&sys, &[0.0; 3], 1e-9)?)?;
    let fz = zero_dynamics_symbolic(&sys, &nf).expect("three states");
    let restriction = restrict_to_zero_fibre(&sys, &nf, &fz)?;
    println!("output-zeroing input u = {}", nf.feedback.zeroing_input());

    let cmp = compare_with_constrained_definition(&sys, &nf, &restriction, &[1.0, 0.0, 0.0], 1.0, 1e-3)?;
    println!("closed loop x(1)  = {:?}", cmp.closed_loop_final);
    println!("restricted x(1)   = {:?}", cmp.restricted_final);
    println!("e^-1              = {}", (-1.0f64).exp());
    println!("max discrepancy {:.3e}, max |Φ| {:.3e}", cmp.max_discrepancy, cmp.max_output);
    Ok(())
}
