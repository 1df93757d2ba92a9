//! Horizontal lift of a sampled quotient curve through two points of the same
//! fibre, written as CSV to stdout.

use fibrelin::lie::relative_degree;
use fibrelin::normal_form::NormalForm;
use fibrelin::sim::{lift_curve, simulate_linear, InputSignal};
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let nf = NormalForm::build(&sys, &relative_degree(&sys, &[0.0; 3], 1e-9)?)?;
    let base = simulate_linear(&nf, &[0.0, 0.0], &InputSignal::parse("cos(2*t)")?, 1.0, 0.05)?;

    for x0 in [[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]] {
        let lifted = lift_curve(&nf, &base, &x0)?;
        eprintln!("lift through {x0:?} ends at {:?}", lifted.last());
        lifted.write_csv(std::io::stdout().lock())?;
    }
    Ok(())
}
