//! Evolve in the lab, map to normalized variables, and compare with direct
//! evolution in the normalized frame. A FODO cell with a soft inverse-square
//! barrier.

use ermakov::fields::{gaussian, GridSpec};
use ermakov::lattice::{matched_envelope, LatticeSpec};
use ermakov::potential::ScalarPotential;
use ermakov::reference::OSCILLATOR_LENGTH;
use ermakov::schrodinger::{LabPotential, LabPropagator, NormalizedPropagator};
use ermakov::transform::{ermakov_forward, ermakov_inverse, normalized_potential, FrameSchedule};

fn main() -> ermakov::Result<()> {
    let cell = LatticeSpec::from_pairs(&[(2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 1.0)])?;
    let u = ScalarPotential::InverseSquare {
        strength: 0.5,
        eps: 0.5,
    };
    let sched = FrameSchedule::new(&cell, matched_envelope(&cell)?, cell.period())?;

    // the lab box has to hold the normalized box stretched by sqrt(beta_max)
    let norm_grid = GridSpec::line(1024, 12.0)?;
    let lab_grid = GridSpec::line(2048, 28.0)?;

    let mut nrm = gaussian(&norm_grid, [0.8, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let mut lab = ermakov_inverse(&nrm, &sched.at(0.0)?, &lab_grid)?.field;
    let mut lp = LabPropagator::new(&lab_grid, LabPotential::new(cell.clone(), u.clone()));
    let mut np = NormalizedPropagator::new(&norm_grid, normalized_potential(&u, &sched));

    for k in 1..=6 {
        let t = cell.period() * k as f64 / 6.0;
        let f = sched.at(t)?;
        lp.advance(&mut lab, t, 1e-3)?;
        np.advance(&mut nrm, f.tau, 1e-3)?;
        let mapped = ermakov_forward(&lab, &f, &norm_grid)?;
        let defect = 1.0 - mapped.field.fidelity(&nrm)?;
        println!(
            "t {t:4.2}  tau {:6.4}  beta {:6.4}  defect {defect:.2e}",
            f.tau, f.beta
        );
    }
    Ok(())
}
