//! A Gaussian at the waist of a drift spreads with β = 1 + t².

use ermakov::fields::{gaussian, GridSpec};
use ermakov::lattice::LatticeSpec;
use ermakov::potential::ScalarPotential;
use ermakov::reference::{drift_beta, OSCILLATOR_LENGTH};
use ermakov::schrodinger::{LabPotential, LabPropagator};

fn main() -> ermakov::Result<()> {
    let grid = GridSpec::line(1024, 30.0)?;
    let mut psi = gaussian(&grid, [0.0, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let x2 = psi.expect_r2();
    let mut prop = LabPropagator::new(
        &grid,
        LabPotential::new(LatticeSpec::constant(0.0, 2.0)?, ScalarPotential::Zero),
    );

    println!(
        "{:>5} {:>12} {:>12} {:>10}",
        "t", "<x^2>", "beta <x0^2>", "rel err"
    );
    for k in 1..=8 {
        let t = 0.25 * k as f64;
        prop.advance(&mut psi, t, 1e-3)?;
        let want = drift_beta(t).0 * x2;
        println!(
            "{t:5.2} {:12.8} {:12.8} {:10.2e}",
            psi.expect_r2(),
            want,
            psi.expect_r2() / want - 1.0
        );
    }
    println!("edge ratio {:.1e}", psi.edge_ratio());
    Ok(())
}
