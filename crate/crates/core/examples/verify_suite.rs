//! Runs the full verification suite over the system catalog.

use implicit_dynamics::verify::{run_suite, VerifyOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let report = run_suite(&VerifyOptions {
        seed: 2024,
        ..Default::default()
    })?;
    for c in &report.checks {
        println!("{:<48} {:.2e} <= {:.0e}  {}", c.name, c.measured, c.tol, if c.passed { "ok" } else { "FAIL" });
    }
    println!("passed: {}", report.passed);
    Ok(())
}
