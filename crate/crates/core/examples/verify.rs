//! The seeded property suites behind `fibrelin verify`.

use fibrelin::cli::{verify, Tolerances, DEFAULT_SEED};
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let report = verify(&sys, 50, DEFAULT_SEED, &Tolerances::default())?;
    println!("{report}");
    Ok(())
}
