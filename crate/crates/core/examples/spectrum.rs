//! Normalized oscillator levels (ħ = √2), with Richardson extrapolation.

use std::f64::consts::SQRT_2;

use ermakov::fields::GridSpec;
use ermakov::reference::oscillator_energy;
use ermakov::schrodinger::{richardson, solve_stationary};

fn main() -> ermakov::Result<()> {
    let v = |r: [f64; 2]| 0.5 * r[0] * r[0];
    let coarse = solve_stationary(v, &GridSpec::line(512, 10.0)?, 5)?;
    let fine = solve_stationary(v, &GridSpec::line(1024, 10.0)?, 5)?;
    println!(
        "{:>2} {:>12} {:>10} {:>10}",
        "n", "exact", "n=512", "extrap"
    );
    for (n, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        let exact = oscillator_energy(n);
        let r = richardson(c.0, f.0);
        println!(
            "{n:2} {exact:12.9} {:10.2e} {:10.2e}",
            c.0 - exact,
            r - exact
        );
    }
    println!(
        "spacing {:.6} (expect {SQRT_2:.6})",
        coarse[1].0 - coarse[0].0
    );

    let levels2d = solve_stationary(
        |r| 0.5 * (r[0] * r[0] + r[1] * r[1]),
        &GridSpec::square(128, 6.0)?,
        3,
    )?;
    for (e, _) in &levels2d {
        println!("2D level {e:.5}");
    }
    Ok(())
}
