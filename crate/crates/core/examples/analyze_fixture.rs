//! The whole pipeline on the three-state fixture: relative degree, normal
//! form, horizontal lift and zero dynamics.
//!
//! ```text
//! cargo run --example analyze_fixture
//! ```

use fibrelin::cli::{analyze, Tolerances};
use fibrelin::system::parse_system;

fn main() -> fibrelin::Result<()> {
    let sys = parse_system(include_str!("../fixtures/isidori.fl"))?;
    let report = analyze(&sys, None, &Tolerances::default())?;
    print!("{report}");
    Ok(())
}
