//! The connection at a point: bases of the horizontal and vertical spaces,
//! the lift of a quotient vector and the splitting of a state vector.

use fibrelin::connection::{connection_at, symbolic_lift_matrix};
use fibrelin::lie::relative_degree;
use fibrelin::normal_form::NormalForm;
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let nf = NormalForm::build(&sys, &relative_degree(&sys, &[0.0; 3], 1e-9)?)?;

    if let Some(h) = symbolic_lift_matrix(&nf) {
        println!("Hor_x as a matrix in Y:");
        for row in &h {
            println!("  [{}]", row.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "));
        }
    }

    let x = [0.3, -0.4, 1.2];
    let cp = connection_at(&nf, &x)?;
    println!("at x = {x:?}");
    println!("  H basis {}", cp.h_basis);
    println!("  V basis {}", cp.v_basis);

    let y = [1.0, -2.0];
    let lifted = cp.horizontal_lift(&y)?;
    println!("  Hor({y:?}) = {lifted:?}, projects back to {:?}", cp.project(&lifted));

    let (xh, xv) = cp.decompose(&[1.0, 1.0, 1.0])?;
    println!("  (1, 1, 1) = {xh:?} + {xv:?}");
    Ok(())
}
