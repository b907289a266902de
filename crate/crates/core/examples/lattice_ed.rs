//! Exact ground energy of a small ring squeezed between the core-shell lower
//! bound and the mean-field upper bound.
//!
//! ```text
//! cargo run --release --example lattice_ed
//! ```

use bhmft::coreshell::core_shell_energy;
use bhmft::lattice::{ground_energy_per_site, make_torus, BHParams};
use bhmft::meanfield::minimize_scan_default;

fn main() -> bhmft::Result<()> {
    let g = make_torus(1, 6)?;
    println!(
        "ring: {} sites, z = {}, {} edges",
        g.n_vertices,
        g.coordination,
        g.edges.len()
    );
    println!(
        "{:>6} {:>6} {:>14} {:>14} {:>14}",
        "J/U", "mu/U", "E_1z/2z", "E_lattice", "E_mf"
    );
    for (j, mu) in [(0.02, 0.3), (0.05, 0.5), (0.1, 0.5), (0.2, 0.5)] {
        let p = BHParams::new(j, mu, 1.0, 3)?;
        let lower = core_shell_energy(g.coordination, &p)?;
        let exact = ground_energy_per_site(&g, &p)?;
        let upper = minimize_scan_default(&p)?.energy;
        println!("{j:>6.3} {mu:>6.3} {lower:>14.10} {exact:>14.10} {upper:>14.10}");
    }
    Ok(())
}
