//! Pauli evolution with a vector potential in both frames. The normalized
//! equation picks up a scalar term from the quadratic phase; this compares
//! the variants of that term.

use std::f64::consts::SQRT_2;

use ermakov::fields::{gaussian, GridSpec, SpinorField, C64};
use ermakov::lattice::{matched_envelope, LatticeSpec};
use ermakov::pauli::{
    CrossTerm, EMFieldSpec, NormalizedPauliPropagator, PauliPropagator, VectorPotential,
};
use ermakov::reference::OSCILLATOR_LENGTH;
use ermakov::transform::{ermakov_forward_spinor, ermakov_inverse, FrameSchedule};

fn main() -> ermakov::Result<()> {
    let cell = LatticeSpec::from_pairs(&[(2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 1.0)])?;
    let sched = FrameSchedule::new(&cell, matched_envelope(&cell)?, 1.5)?;
    let lab_grid = GridSpec::line(512, 20.0)?;
    let norm_grid = GridSpec::line(512, 8.0)?;
    let em = EMFieldSpec {
        a: VectorPotential::Radial {
            strength: 0.5,
            eps: 1.0,
        },
        ..Default::default()
    };

    let s = 1.0 / SQRT_2;
    let psi_n = gaussian(&norm_grid, [0.5, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let lab0 = ermakov_inverse(&psi_n, &sched.at(0.0)?, &lab_grid)?.field;
    let lab0 = SpinorField::product(&lab0, [C64::new(s, 0.0), C64::new(s, 0.0)]);

    let mut lab = lab0.clone();
    PauliPropagator::new(&lab_grid, &cell, em.clone()).advance(&mut lab, 1.5, 1e-3)?;
    let end = sched.at(1.5)?;
    let mapped = ermakov_forward_spinor(&lab, &end, &norm_grid)?.field;

    for cross in [CrossTerm::Derived, CrossTerm::AsPrinted, CrossTerm::Omitted] {
        let mut nrm = ermakov_forward_spinor(&lab0, &sched.at(0.0)?, &norm_grid)?.field;
        NormalizedPauliPropagator::new(&norm_grid, em.clone(), sched.track().clone(), cross)
            .advance(&mut nrm, end.tau, 1e-3)?;
        println!("{cross:?}: defect {:.2e}", 1.0 - mapped.fidelity(&nrm)?);
    }
    Ok(())
}
