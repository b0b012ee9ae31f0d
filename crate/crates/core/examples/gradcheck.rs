//! Runs the finite-difference gradient suite and prints every check.
//!
//! cargo run --release --example gradcheck

use lungnet::gradcheck::run_suite;

fn main() -> lungnet::Result<()> {
    let checks = run_suite(42)?;
    for c in &checks {
        println!(
            "{:<32} {:>6} elems  max rel err {:.3e}  (tol {:.0e}) {}",
            c.result.name,
            c.result.elements,
            c.result.max_relative_error,
            c.tolerance,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
