//! Trajectories of the lifted system and of the original system under the
//! linearising feedback both project onto the linear quotient trajectory.

use fibrelin::lie::relative_degree;
use fibrelin::normal_form::NormalForm;
use fibrelin::sim::{verify_projection, InputSignal};
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let nf = NormalForm::build(&sys, &relative_degree(&sys, &[0.0; 3], 1e-9)?)?;
    let v = InputSignal::parse("sin(t)")?;
    for x0 in [[0.5, 0.2, -0.1], [-1.0, 0.5, 0.3]] {
        let rep = verify_projection(&sys, &nf, &x0, &v, 1.0, 1e-3)?;
        println!(
            "x0 = {x0:?}, z0 = {:?}: lifted error {:.3e}, full error {:.3e}",
            rep.z0, rep.lifted_error, rep.full_error
        );
    }
    Ok(())
}
