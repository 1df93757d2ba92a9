//! Relative degree with its Lie-derivative certificates, for the fixture and
//! for a pendulum whose output has full relative degree.

use fibrelin::lie::relative_degree;
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let systems = [
        include_str!("../fixtures/isidori.fl"),
        "system \"pendulum\"\nstates x1 x2\ninput u\nf = [x2, -sin(x1)]\ng = [0, 1]\nh = x1\n",
    ];
    for text in systems {
        let sys = parse_system(text)?;
        let rd = relative_degree(&sys, &sys.operating_point(), 1e-9)?;
        println!("{}: r = {}", sys.name, rd.r);
        for c in &rd.certificates {
            println!("  L_g L_f^{} h = {}  ({:?})", c.k, c.expr, c.verdict);
        }
        println!("  α = {}, β = {}", rd.alpha, rd.beta);
    }
    Ok(())
}
