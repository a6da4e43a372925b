//! The batch certification entry point the CLI exposes as `verify-bound`:
//! random tabular instances for the composed-policy bound, random linear
//! instances for the linear-model bound, one JSON report with every number
//! that went into each inequality.
//!
//! Run with: `cargo run --release --example certify_bounds`

use trail::pipeline::{verify_bound, VerifyArgs};

fn main() -> trail::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let report = verify_bound(&VerifyArgs { instances: 25, seed: 0 }, dir.path())?;
    println!(
        "composed-policy bound: {} instances, worst slack {:.3e}",
        report.theorem1.len(),
        report
            .theorem1
            .iter()
            .map(|r| r.rhs - r.lhs)
            .fold(f64::INFINITY, f64::min),
    );
    println!(
        "linear-model bound:    {} instances, worst slack {:.3e}",
        report.theorem3.len(),
        report
            .theorem3
            .iter()
            .map(|r| r.rhs - r.lhs)
            .fold(f64::INFINITY, f64::min),
    );
    println!("violations: {}", report.violations);
    println!("full report written to {}", dir.path().join("verify-bound.json").display());
    Ok(())
}
