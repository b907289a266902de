//! Coarse mean-field phase diagram drawn in the terminal, plus the tip of the
//! first Mott lobe located by bisection.
//!
//! ```text
//! cargo run --release --example phase_diagram
//! ```

use bhmft::meanfield::{linspace, mott_boundary, phase_scan};

fn main() -> bhmft::Result<()> {
    let js = linspace(0.0, 0.2, 60);
    let mus = linspace(0.0, 3.0, 30);
    let pd = phase_scan(&js, &mus, 8, 1e-6)?;
    // μ grows upwards, J to the right; digits mark the Mott filling
    for (i, mu) in mus.iter().enumerate().rev() {
        let row: String = (0..js.len())
            .map(|j| {
                if pd.is_mott(i, j) {
                    char::from_digit(pd.mean_n[i][j].round() as u32 % 10, 10).unwrap()
                } else {
                    '.'
                }
            })
            .collect();
        println!("{mu:5.2} {row}");
    }
    println!("      J/U from 0 to 0.2");

    let mut best = (0.0, 0.0);
    for mu in linspace(0.30, 0.50, 21) {
        let jc = mott_boundary(mu, 8, 0.0, 0.2, 1e-6, 1e-7)?;
        if jc > best.1 {
            best = (mu, jc);
        }
    }
    println!(
        "first lobe tip near mu/U = {:.3}, J_c/U = {:.5}",
        best.0, best.1
    );
    Ok(())
}
