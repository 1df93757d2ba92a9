#![allow(dead_code)]

use fibrelin::lie::relative_degree;
use fibrelin::normal_form::NormalForm;
use fibrelin::system::{parse_system, SystemDef};

pub const FIXTURE: &str = include_str!("../../fixtures/isidori.fl");

/// The fixture exactly as shipped.
pub fn fixture() -> SystemDef {
    parse_system(FIXTURE).unwrap()
}

/// The fixture with its `complement` line removed.
pub fn without_complement() -> SystemDef {
    let text: String = FIXTURE.lines().filter(|l| !l.starts_with("complement")).map(|l| format!("{l}\n")).collect();
    parse_system(&text).unwrap()
}

/// Four states, relative degree two, non-trivial supplied complement.
pub fn four_states() -> SystemDef {
    parse_system(
        "states x1 x2 x3 x4\ninput u\nf = [x3, 0, 0, 0]\ng = [0, 0, 1, 0]\nh = x1 + x2^2\n\
         complement = [x2 + sin(x4), x4 + x1*x3]\n",
    )
    .unwrap()
}

/// Relative degree equal to the state dimension.
pub fn full_degree() -> SystemDef {
    parse_system("states x1 x2\ninput u\nf = [x2, -sin(x1)]\ng = [0, 1]\nh = x1\n").unwrap()
}

pub fn normal_form(sys: &SystemDef) -> NormalForm {
    let p = sys.operating_point();
    NormalForm::build_at(sys, &relative_degree(sys, &p, 1e-9).unwrap(), &p).unwrap()
}
