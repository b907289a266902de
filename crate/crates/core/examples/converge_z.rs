//! Gap between the mean-field energy and the core-shell lower bound as the
//! coordination number grows.
//!
//! ```text
//! cargo run --release --example converge_z
//! ```

use bhmft::coreshell::{convergence_csv, convergence_table};
use bhmft::lattice::BHParams;
use bhmft::numerics::RngSeed;

fn main() -> bhmft::Result<()> {
    let p = BHParams::new(0.05, 0.5, 1.0, 6)?;
    let rows = convergence_table(&[2, 4, 8, 16, 32], &p, RngSeed(42))?;
    print!("{}", convergence_csv(&rows));
    let ratio = rows[4].gap / rows[1].gap;
    println!("# gap(32) / gap(4) = {ratio:.4}");
    Ok(())
}
