//! Populations of normalized eigenmodes stay fixed while a wavepacket
//! breathes through a FODO cell.

use ermakov::fields::{GridSpec, C64};
use ermakov::lattice::{matched_envelope, LatticeSpec};
use ermakov::potential::ScalarPotential;
use ermakov::reference::lewis_riesenfeld_check;
use ermakov::scenario::oscillator_superposition;
use ermakov::schrodinger::{LabPotential, LabPropagator};
use ermakov::transform::{ermakov_inverse, FrameSchedule};

fn main() -> ermakov::Result<()> {
    let cell = LatticeSpec::from_pairs(&[(2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 1.0)])?;
    let sched = FrameSchedule::new(&cell, matched_envelope(&cell)?, 2.0 * cell.period())?;
    let lab_grid = GridSpec::line(1024, 20.0)?;
    let norm_grid = GridSpec::line(512, 10.0)?;

    let coefs = [
        (0, C64::new(0.6, 0.0)),
        (1, C64::new(0.0, 0.64)),
        (3, C64::new(0.48, 0.0)),
    ];
    let psi_n = oscillator_superposition(&norm_grid, &coefs).normalized();
    let mut psi = ermakov_inverse(&psi_n, &sched.at(0.0)?, &lab_grid)?.field;
    let mut prop = LabPropagator::new(
        &lab_grid,
        LabPotential::new(cell.clone(), ScalarPotential::Zero),
    );

    let (mut fields, mut frames) = (vec![psi.clone()], vec![sched.at(0.0)?]);
    for k in 1..=12 {
        let t = 2.0 * cell.period() * k as f64 / 12.0;
        prop.advance(&mut psi, t, 1e-3)?;
        fields.push(psi.clone());
        frames.push(sched.at(t)?);
    }
    let rep = lewis_riesenfeld_check(&fields, &frames, &norm_grid, 6)?;
    for (f, p) in frames.iter().zip(&rep.populations).step_by(3) {
        let row: Vec<String> = p.iter().map(|x| format!("{x:.6}")).collect();
        println!("t {:5.2}  {}", f.t, row.join(" "));
    }
    println!(
        "max population drift {:.2e}, total {:.2e}",
        rep.max_drift(),
        rep.total_drift
    );
    Ok(())
}
