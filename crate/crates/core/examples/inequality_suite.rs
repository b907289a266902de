//! Moment inequalities of the core-shell Hamiltonian and the localization
//! bound, printed as a report.
//!
//! ```text
//! cargo run --release --example inequality_suite
//! ```

use bhmft::cli::inequality_checks;
use bhmft::definetti::{localization_bound_check, random_projector, suite_state};
use bhmft::lattice::BHParams;
use bhmft::numerics::RngSeed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for j in [0.1, -0.1] {
        let p = BHParams::new(j, 0.5, 1.0, 3)?;
        for c in inequality_checks(3, &p, 20, RngSeed(5))? {
            println!(
                "J={j:+.1} {:<15} violation {:>10.2e}  {}  {}",
                c.name,
                c.distance,
                if c.pass { "ok" } else { "FAIL" },
                c.params
            );
        }
    }

    let state = suite_state(2, 2, 6, RngSeed(4), 0)?;
    for rank in 1..=2 {
        let proj = random_projector(2, rank, RngSeed(rank as u64))?;
        for k in 1..=3 {
            let (d, b) = localization_bound_check(&state, &proj, k)?;
            println!("localization rank {rank} k={k}: {d:.3e} <= {b:.4}");
        }
    }
    Ok(())
}
