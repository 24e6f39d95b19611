//! Spin precession in a uniform field, against the two-level solution.

use std::f64::consts::SQRT_2;

use ermakov::fields::{gaussian, GridSpec, SpinorField, C64};
use ermakov::lattice::LatticeSpec;
use ermakov::pauli::{spin_observables, EMFieldSpec, MagneticField, PauliPropagator};
use ermakov::scenario::precess;

fn main() -> ermakov::Result<()> {
    let b = [0.0, 0.3, 0.8];
    let em = EMFieldSpec {
        b: MagneticField::Uniform { b },
        ..Default::default()
    };
    let grid = GridSpec::line(256, 6.0)?;
    let s = 1.0 / SQRT_2;
    let mut psi = SpinorField::product(
        &gaussian(&grid, [0.5, 0.0], 0.8, [0.0, 0.0]),
        [C64::new(s, 0.0), C64::new(s, 0.0)],
    );
    let mut prop = PauliPropagator::new(&grid, &LatticeSpec::constant(4.0, 4.0)?, em.clone());

    let s0 = spin_observables(&psi);
    let s0 = [s0.sx, s0.sy, s0.sz];
    for k in 1..=8 {
        let t = 0.5 * k as f64;
        prop.advance(&mut psi, t, 1e-3)?;
        let o = spin_observables(&psi);
        let want = precess(s0, b, em.pauli_coef, t);
        let err = (o.sx - want[0])
            .abs()
            .max((o.sy - want[1]).abs())
            .max((o.sz - want[2]).abs());
        println!(
            "t {t:4.1}  <s> = ({:+.6}, {:+.6}, {:+.6})  err {err:.1e}",
            o.sx, o.sy, o.sz
        );
    }
    Ok(())
}
