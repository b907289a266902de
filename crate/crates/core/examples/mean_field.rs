//! Gutzwiller minimization at a few points, by the one-dimensional scan and by
//! self-consistent iteration.
//!
//! ```text
//! cargo run --release --example mean_field
//! ```

use bhmft::lattice::BHParams;
use bhmft::meanfield::{minimize_scan_default, minimize_scf, truncation_shift};
use num_complex::Complex64;

fn main() -> bhmft::Result<()> {
    println!(
        "{:>6} {:>6} {:>16} {:>12} {:>10} {:>16}",
        "J/U", "mu/U", "E_mf", "|alpha|", "<N>", "E_scf - E_scan"
    );
    for (j, mu) in [
        (0.01, 0.5),
        (0.05, 0.5),
        (0.1, 0.5),
        (0.2, 0.5),
        (0.05, 1.5),
        (0.2, 1.5),
    ] {
        let p = BHParams::new(j, mu, 1.0, 10)?;
        let scan = minimize_scan_default(&p)?;
        let scf = minimize_scf(&p, Complex64::new(0.5, 0.0), 0.5, 1e-12, 10_000)?;
        println!(
            "{j:>6.3} {mu:>6.3} {:>16.12} {:>12.6} {:>10.6} {:>16.2e}",
            scan.energy,
            scan.alpha.norm(),
            scan.mean_n(),
            scf.energy - scan.energy
        );
    }
    // effect of the Fock cutoff deep in the superfluid
    let p = BHParams::new(0.2, 1.5, 1.0, 6)?;
    println!(
        "cutoff shift n_max 6 -> 7 at J/U = 0.2, mu/U = 1.5: {:.3e}",
        truncation_shift(&p)?
    );
    Ok(())
}
