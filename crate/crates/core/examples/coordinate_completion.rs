//! Completing Φ to a full coordinate chart, with a supplied complement and
//! with the greedy completion when none is given.

use fibrelin::lie::relative_degree;
use fibrelin::normal_form::{check_diffeomorphism, NormalForm};
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let text = include_str!("../fixtures/isidori.fl");
    let without: String = text.lines().filter(|l| !l.starts_with("complement")).map(|l| format!("{l}\n")).collect();
    for (label, text) in [("supplied", text), ("completed", without.as_str())] {
        let sys = parse_system(text)?;
        let rd = relative_degree(&sys, &sys.operating_point(), 1e-9)?;
        let nf = NormalForm::build(&sys, &rd)?;
        let report = check_diffeomorphism(&nf.lambda, &sys.states, &nf.region(2.0), 64);
        println!("{label}: Λ = {:?}", nf.lambda.iter().map(ToString::to_string).collect::<Vec<_>>());
        println!(
            "  det JΛ(0) = {}, min |det| over {} samples = {:.4}",
            nf.det_at_point, report.samples, report.min_abs_det
        );
    }
    Ok(())
}
