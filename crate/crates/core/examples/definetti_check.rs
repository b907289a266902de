//! Distance between reduced density matrices of random bosonic states and
//! their de Finetti approximations, against the `4mk/(N+1)` bound.
//!
//! ```text
//! cargo run --release --example definetti_check
//! ```

use bhmft::definetti::{definetti_distance, eta_construction, suite_state, Quadrature};
use bhmft::numerics::RngSeed;

fn main() -> bhmft::Result<()> {
    println!(
        "{:>3} {:>3} {:>3} {:>12} {:>10} {:>10}",
        "m", "N", "k", "distance", "bound", "eta trace"
    );
    for (m, n) in [(1, 2), (1, 4), (1, 6), (2, 2), (2, 4)] {
        let state = suite_state(2, m, n, RngSeed(8), 1)?;
        let eta = eta_construction(&state, Quadrature::Exact)?;
        for k in 1..=n.min(2) {
            let (d, b) = definetti_distance(&state, &eta, k)?;
            println!(
                "{m:>3} {n:>3} {k:>3} {d:>12.6} {b:>10.4} {:>10.6}",
                eta.trace()
            );
        }
    }

    // sampled quadrature on a case where the exact expansion is also available
    let state = suite_state(2, 1, 4, RngSeed(8), 0)?;
    let exact = eta_construction(&state, Quadrature::Exact)?;
    let sampled = eta_construction(
        &state,
        Quadrature::MonteCarlo {
            samples: 20_000,
            seed: RngSeed(1),
        },
    )?;
    println!(
        "m=1 N=4 k=1: exact {:.6}, Monte Carlo {:.6}",
        definetti_distance(&state, &exact, 1)?.0,
        definetti_distance(&state, &sampled, 1)?.0
    );
    Ok(())
}
