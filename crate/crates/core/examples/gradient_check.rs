//! Runs every finite-difference gradient suite and prints the worst
//! relative error of each.
//!
//! `cargo run --release --example gradient_check [-- seed]`

use densesr::gradsuite::{run_suite, SUITES};

fn main() -> densesr::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    for name in SUITES {
        let r = run_suite(name, seed)?;
        let worst = r
            .worst
            .map(|(t, i)| format!("{t}[{i}]"))
            .unwrap_or_default();
        println!(
            "{name:<14} max rel error {:.3e} over {} coords (worst {worst} {:?})",
            r.max_rel_error, r.coords_checked, r.worst_values
        );
    }
    Ok(())
}
