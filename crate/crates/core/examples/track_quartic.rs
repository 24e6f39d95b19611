//! Symplectic tracking through a FODO cell with a quartic term that scales
//! with the envelope, so its normalized Hamiltonian is conserved.

use ermakov::classical::{
    normalized_hamiltonian, to_normalized, track_with, PhaseState, PotentialSpec, Record, Tracker,
};
use ermakov::lattice::{LatticeSpec, MatchedEnvelope};
use ermakov::potential::ScalarPotential;

fn drift(
    cell: &LatticeSpec,
    pot: &PotentialSpec,
    turns: f64,
    steps: usize,
) -> ermakov::Result<f64> {
    let env = MatchedEnvelope::new(cell)?;
    let tracker = Tracker::new(cell, pot.clone())?;
    let s0 = PhaseState::new(0.4, 0.0, -0.3, 0.1, 0.0);
    let traj = track_with(&tracker, &s0, turns * cell.period(), steps, Record::Periods)?;
    let h: Vec<f64> = traj
        .states
        .iter()
        .map(|s| normalized_hamiltonian(&to_normalized(s, &env.at(s.s)?), pot))
        .collect::<ermakov::Result<_>>()?;
    Ok(h.iter()
        .map(|v| (v - h[0]).abs() / h[0].abs())
        .fold(0.0, f64::max))
}

fn main() -> ermakov::Result<()> {
    let cell = LatticeSpec::from_pairs(&[(2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 1.0)])?;
    let pot = PotentialSpec::MuIndependent {
        shape: ScalarPotential::Quartic { coef: 0.05 },
    };
    let mut prev = None;
    for steps in [100, 200, 400] {
        let d = drift(&cell, &pot, 1000.0, steps)?;
        match prev {
            Some(p) => println!("steps/segment {steps:4}: drift {d:.3e}  ratio {:.3}", p / d),
            None => println!("steps/segment {steps:4}: drift {d:.3e}"),
        }
        prev = Some(d);
    }
    Ok(())
}
