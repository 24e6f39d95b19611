#![allow(dead_code)]

use ermakov::lattice::{one_turn_matrix, LatticeSpec};
use rand::Rng;

pub fn fodo() -> LatticeSpec {
    LatticeSpec::from_pairs(&[(2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 1.0)]).unwrap()
}

/// Random lattice of 2 to 5 segments with `|trace/2| < 0.95`.
pub fn random_stable_lattice<R: Rng>(rng: &mut R) -> LatticeSpec {
    loop {
        let n = rng.random_range(2..=5);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.1..1.5)))
            .collect();
        let lat = LatticeSpec::from_pairs(&pairs).unwrap();
        if (0.5 * one_turn_matrix(&lat).trace()).abs() < 0.95 {
            return lat;
        }
    }
}

use ermakov::fields::{GridSpec, WaveField};
use ermakov::lattice::EnvelopeFrame;
use ermakov::potential::ScalarPotential;
use ermakov::schrodinger::{LabPotential, LabPropagator, NormalizedPropagator};
use ermakov::transform::{ermakov_forward, ermakov_inverse, normalized_potential, FrameSchedule};

/// Evolves `psi_n` (normalized frame, `τ = 0`) directly in the normalized
/// frame and, mapped to the lab, in the lab frame; returns `1 − |⟨·,·⟩|`
/// after mapping the lab state forward at each checkpoint.
pub fn equivalence_defects(
    lattice: &LatticeSpec,
    env0: EnvelopeFrame,
    u: &ScalarPotential,
    lab_grid: &GridSpec,
    psi_n: &WaveField,
    dt: f64,
    checkpoints: &[f64],
) -> Vec<f64> {
    let t_end = *checkpoints.last().unwrap();
    let sched = FrameSchedule::new(lattice, env0, t_end).unwrap();
    let norm_grid = psi_n.grid.clone();
    let mut lab = ermakov_inverse(psi_n, &sched.at(0.0).unwrap(), lab_grid)
        .unwrap()
        .field;
    let mut nrm = psi_n.clone();
    let mut lp = LabPropagator::new(lab_grid, LabPotential::new(lattice.clone(), u.clone()));
    let mut np = NormalizedPropagator::new(&norm_grid, normalized_potential(u, &sched));
    checkpoints
        .iter()
        .map(|&t| {
            let f = sched.at(t).unwrap();
            lp.advance(&mut lab, t, dt).unwrap();
            np.advance(&mut nrm, f.tau, dt).unwrap();
            let mapped = ermakov_forward(&lab, &f, &norm_grid).unwrap().field;
            1.0 - mapped.fidelity(&nrm).unwrap()
        })
        .collect()
}

use ermakov::classical::{
    courant_snyder, normalized_hamiltonian, to_normalized, track, PhaseState, PotentialSpec,
};
use ermakov::lattice::MatchedEnvelope;

pub fn relative_drift(values: &[f64]) -> f64 {
    values
        .iter()
        .map(|v| (v - values[0]).abs() / values[0].abs())
        .fold(0.0, f64::max)
}

pub fn cs_drift(lattice: &LatticeSpec, steps: usize) -> f64 {
    let env = MatchedEnvelope::new(lattice).unwrap();
    let s0 = PhaseState::new(0.5, 0.1, -0.2, 0.3, 0.0);
    let traj = track(&s0, lattice, &PotentialSpec::None, 100, steps).unwrap();
    let (ix, iy): (Vec<f64>, Vec<f64>) = traj
        .states
        .iter()
        .map(|s| courant_snyder(&to_normalized(s, &env.at(s.s).unwrap())))
        .unzip();
    relative_drift(&ix).max(relative_drift(&iy))
}

pub fn quartic_drift(steps: usize) -> f64 {
    let lat = fodo();
    let pot = PotentialSpec::MuIndependent {
        shape: ScalarPotential::Quartic { coef: 0.05 },
    };
    let env = MatchedEnvelope::new(&lat).unwrap();
    let s0 = PhaseState::new(0.4, 0.0, -0.3, 0.1, 0.0);
    let tracker = ermakov::classical::Tracker::new(&lat, pot.clone()).unwrap();
    let traj = ermakov::classical::track_with(
        &tracker,
        &s0,
        1000.0 * lat.period(),
        steps,
        ermakov::classical::Record::Periods,
    )
    .unwrap();
    let h: Vec<f64> = traj
        .states
        .iter()
        .map(|s| normalized_hamiltonian(&to_normalized(s, &env.at(s.s).unwrap()), &pot).unwrap())
        .collect();
    relative_drift(&h)
}
