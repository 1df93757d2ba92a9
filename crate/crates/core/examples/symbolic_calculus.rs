//! Parsing, differentiation, simplification and zero testing of expressions.

use fibrelin::expr::{diff, is_zero_default, normalize, parse_expr, simplify, Point, SymbolTable};

fn main() -> fibrelin::Result<()> {
    let table = SymbolTable::with_states(&["x1", "x2"]);
    let e = parse_expr("x1*exp(x2) + sin(x1)^2", &table)?;
    println!("e        = {e}");
    for var in ["x1", "x2"] {
        println!("de/d{var}   = {}", diff(&e, var));
    }

    let at = Point::new().with("x1", 0.5).with("x2", -1.0);
    println!("e(0.5, -1) = {}", e.eval(&at)?);

    // `simplify` only cancels syntactically identical terms; `normalize`
    // expands and collects monomials, so it also sees commuted products.
    let messy = parse_expr("1*(x2) + 0 + x1*x2 - x2*x1", &table)?;
    println!("simplify({messy}) = {}", simplify(&messy));
    println!("normalize({messy}) = {}", normalize(&messy));

    // Not syntactically zero, but zero everywhere.
    let identity = parse_expr("sin(x1)^2 + cos(x1)^2 - 1", &table)?;
    println!("{identity} is zero: {:?}", is_zero_default(&identity)?);
    Ok(())
}
