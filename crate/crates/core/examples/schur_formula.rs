//! The symmetric projector as a Haar average of rank-one tensor powers, checked
//! exactly and by sampling.
//!
//! ```text
//! cargo run --release --example schur_formula
//! ```

use bhmft::definetti::{schur_check, schur_mc_sigma, sym_dim};
use bhmft::numerics::RngSeed;

fn main() -> bhmft::Result<()> {
    println!(
        "{:>3} {:>3} {:>8} {:>12} {:>12} {:>12}",
        "m", "N", "rank", "exact err", "MC err", "MC sigma"
    );
    for (m, n) in [(1, 1), (1, 2), (1, 4), (2, 2), (2, 3), (3, 2)] {
        let samples = 20_000;
        let (mc, exact) = schur_check(m, n, samples, RngSeed(3))?;
        println!(
            "{m:>3} {n:>3} {:>8} {exact:>12.2e} {mc:>12.4e} {:>12.4e}",
            sym_dim(m, n),
            schur_mc_sigma(m, n, samples)
        );
    }
    Ok(())
}
