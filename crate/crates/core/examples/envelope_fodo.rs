//! Matched envelope of a FODO cell: β and its phase advance across one cell.

use ermakov::lattice::{
    cell_phase_advance, matched_envelope, one_turn_matrix, EnvelopeTrack, LatticeSpec,
};
use ermakov::reference::track_residual;

fn main() -> ermakov::Result<()> {
    let cell = LatticeSpec::from_pairs(&[(2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 1.0)])?;
    let m = one_turn_matrix(&cell);
    println!("one-turn trace {:.6}, det {:.3e}", m.trace(), m.det() - 1.0);

    let start = matched_envelope(&cell)?;
    let track = EnvelopeTrack::new(&cell, start, cell.period())?;
    println!("{:>8} {:>10} {:>10} {:>10}", "s", "beta", "beta'", "mu");
    for f in track.sample(4) {
        println!("{:8.4} {:10.6} {:10.6} {:10.6}", f.s, f.beta, f.dbeta, f.mu);
    }

    let mu = cell_phase_advance(&cell)?;
    println!(
        "phase advance {mu:.8} rad, tune {:.6}",
        mu / std::f64::consts::TAU
    );
    println!("envelope residual {:.2e}", track_residual(&track, 50)?);
    Ok(())
}
