mod common;

use std::f64::consts::SQRT_2;

use ermakov::classical::{track, PhaseState, PotentialSpec};
use ermakov::fields::{gaussian, GridSpec, SpinorField, WaveField, C64};
use ermakov::lattice::{matched_envelope, EnvelopeFrame, EnvelopeTrack, LatticeSpec};
use ermakov::pauli::{
    CrossTerm, EMFieldSpec, NormalizedPauliPropagator, PauliPropagator, VectorPotential,
};
use ermakov::potential::ScalarPotential;
use ermakov::reference::{
    drift_beta, lewis_riesenfeld_check, oscillator_energy, OSCILLATOR_LENGTH,
};
use ermakov::scenario::oscillator_superposition;
use ermakov::schrodinger::{
    evolve_lab, evolve_normalized, solve_stationary, LabPotential, NormalizedPotential,
};
use ermakov::transform::{
    ermakov_forward_spinor, ermakov_inverse, normalized_potential, FrameSchedule, TransformFrame,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn courant_snyder_drift_is_small_and_second_order() {
    let lat = common::fodo();
    let (coarse, fine) = (common::cs_drift(&lat, 500), common::cs_drift(&lat, 1000));
    assert!(fine < 1e-6, "drift {fine:.3e}");
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn mu_independent_quartic_conserves_normalized_hamiltonian() {
    let (coarse, fine) = (common::quartic_drift(200), common::quartic_drift(400));
    assert!(coarse < 1e-5, "drift {coarse:.3e}");
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn ehrenfest_means_follow_hill_equation() {
    let lat = common::fodo();
    let grid = GridSpec::line(1024, 20.0).unwrap();
    let psi0 = gaussian(&grid, [0.7, 0.0], 1.1, [0.4, 0.0]);
    let spectral = ermakov::fields::Spectral::new(&grid);
    let (x0, p0) = (psi0.expect_x(), psi0.expect_p(&spectral, 0));
    let classical = track(
        &PhaseState::new(x0, p0, 0.0, 0.0, 0.0),
        &lat,
        &PotentialSpec::None,
        1,
        4000,
    )
    .unwrap();
    for dt in [1e-3, 5e-4] {
        let pot = LabPotential::new(lat.clone(), ScalarPotential::Zero);
        let mut psi = psi0.clone();
        let mut worst = 0.0f64;
        for st in &classical.states[1..] {
            psi = evolve_lab(&psi, &pot, st.s, dt).unwrap();
            worst = worst
                .max((psi.expect_x() - st.x).abs())
                .max((psi.expect_p(&spectral, 0) - st.px).abs());
        }
        assert!(worst < 1e-4, "dt {dt}: {worst:.3e}");
    }
}

#[test]
fn eigenstates_only_acquire_a_phase() {
    let grid = GridSpec::line(1024, 10.0).unwrap();
    let states = solve_stationary(|r| 0.5 * r[0] * r[0], &grid, 3).unwrap();
    let tau = 1.0;
    for (n, (_, psi)) in states.iter().enumerate() {
        let out = evolve_normalized(psi, &NormalizedPotential::oscillator(), tau, 1e-3).unwrap();
        let ov = psi.inner(&out).unwrap();
        assert!(
            (ov.norm() - 1.0).abs() < 1e-4,
            "n = {n}: |overlap| = {}",
            ov.norm()
        );
        let rate = ov.arg() / tau;
        let expected = -oscillator_energy(n) / SQRT_2;
        assert!(
            (rate - expected).abs() < 1e-4,
            "n = {n}: rate {rate} vs {expected}"
        );
    }
}

fn l2_error(a: &WaveField, b: &WaveField) -> f64 {
    let d: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    (d * a.grid.cell_volume()).sqrt()
}

#[test]
fn lab_propagator_is_second_order() {
    let lat = common::fodo();
    let grid = GridSpec::line(256, 12.0).unwrap();
    let psi = gaussian(&grid, [0.5, 0.0], 1.0, [0.3, 0.0]);
    let pot = LabPotential::new(
        lat,
        ScalarPotential::InverseSquare {
            strength: 0.3,
            eps: 0.5,
        },
    );
    let reference = evolve_lab(&psi, &pot, 3.0, 0.02 / 16.0).unwrap();
    let e1 = l2_error(&evolve_lab(&psi, &pot, 3.0, 0.02).unwrap(), &reference);
    let e2 = l2_error(&evolve_lab(&psi, &pot, 3.0, 0.01).unwrap(), &reference);
    assert!((e1 / e2 - 4.0).abs() < 0.3, "ratio {}", e1 / e2);
}

#[test]
fn normalized_propagator_is_second_order() {
    let lat = common::fodo();
    let sched = FrameSchedule::new(&lat, matched_envelope(&lat).unwrap(), 3.0).unwrap();
    let tau_end = sched.at(3.0).unwrap().tau;
    let v = normalized_potential(&ScalarPotential::Quadratic { coef: 0.05 }, &sched);
    assert!(!v.is_time_homogeneous());
    let grid = GridSpec::line(256, 10.0).unwrap();
    let psi = gaussian(&grid, [0.5, 0.0], 1.0, [0.3, 0.0]);
    let reference = evolve_normalized(&psi, &v, tau_end, 0.02 / 16.0).unwrap();
    let e1 = l2_error(
        &evolve_normalized(&psi, &v, tau_end, 0.02).unwrap(),
        &reference,
    );
    let e2 = l2_error(
        &evolve_normalized(&psi, &v, tau_end, 0.01).unwrap(),
        &reference,
    );
    assert!((e1 / e2 - 4.0).abs() < 0.3, "ratio {}", e1 / e2);
}

#[test]
fn free_gaussian_spreads_as_closed_form() {
    // <x²>(t) = <x²>₀ + <p²>₀ t² with <p²>₀ = ħ²/(4<x²>₀), ħ = √2
    let lat = LatticeSpec::constant(0.0, 2.0).unwrap();
    let grid = GridSpec::line(1024, 30.0).unwrap();
    let psi0 = gaussian(&grid, [0.0, 0.0], 1.0, [0.0, 0.0]);
    let x2 = psi0.expect_r2();
    assert!((x2 - 0.5).abs() < 1e-12);
    let pot = LabPotential::new(lat, ScalarPotential::Zero);
    let mut psi = psi0;
    for k in 1..=4 {
        let t = 0.5 * k as f64;
        psi = evolve_lab(&psi, &pot, t, 1e-3).unwrap();
        let expected = 0.5 + t * t;
        assert!(
            (psi.expect_r2() - expected).abs() < 1e-8 * expected,
            "t = {t}"
        );
    }
}

#[test]
fn matched_gaussian_width_follows_drift_envelope() {
    let lat = LatticeSpec::constant(0.0, 2.0).unwrap();
    let env0 = EnvelopeFrame::new(0.0, 1.0, 0.0);
    let grid = GridSpec::line(1024, 30.0).unwrap();
    let psi = gaussian(&grid, [0.0, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let xn2 = psi.expect_r2();
    let pot = LabPotential::new(lat.clone(), ScalarPotential::Zero);
    let track = EnvelopeTrack::new(&lat, env0, 2.0).unwrap();
    let mut cur = psi;
    for k in 1..=8 {
        let t = 0.25 * k as f64;
        cur = evolve_lab(&cur, &pot, t, 1e-3).unwrap();
        let (beta, _) = track.beta_at(t).unwrap();
        assert!((beta - drift_beta(t).0).abs() < 1e-12);
        assert!(
            (cur.expect_r2() / (beta * xn2) - 1.0).abs() < 1e-4,
            "t = {t}"
        );
    }
}

#[test]
fn populations_are_invariant_under_fodo() {
    let lat = common::fodo();
    let env0 = matched_envelope(&lat).unwrap();
    let sched = FrameSchedule::new(&lat, env0, lat.period()).unwrap();
    let lab_grid = GridSpec::line(1024, 20.0).unwrap();
    let norm_grid = GridSpec::line(512, 10.0).unwrap();
    let s = 1.0 / SQRT_2;
    let psi_n =
        oscillator_superposition(&norm_grid, &[(0, C64::new(s, 0.0)), (1, C64::new(s, 0.0))]);
    let frame0 = sched.at(0.0).unwrap();
    let mut psi = ermakov_inverse(&psi_n, &frame0, &lab_grid).unwrap().field;
    let pot = LabPotential::new(lat.clone(), ScalarPotential::Zero);
    let (mut fields, mut frames) = (vec![psi.clone()], vec![frame0]);
    for k in 1..=6 {
        let t = lat.period() * k as f64 / 6.0;
        psi = evolve_lab(&psi, &pot, t, 1e-3).unwrap();
        fields.push(psi.clone());
        frames.push(sched.at(t).unwrap());
    }
    let rep = lewis_riesenfeld_check(&fields, &frames, &norm_grid, 6).unwrap();
    assert!(
        (rep.populations[0][0] - 0.5).abs() < 1e-8 && (rep.populations[0][1] - 0.5).abs() < 1e-8
    );
    assert!(rep.max_drift() < 1e-4, "{}", rep.max_drift());
}

#[test]
fn random_smooth_packet_keeps_total_population_under_drift() {
    let lat = LatticeSpec::constant(0.0, 2.0).unwrap();
    let env0 = EnvelopeFrame::new(0.0, 1.0, 0.0);
    let sched = FrameSchedule::new(&lat, env0, 2.0).unwrap();
    let lab_grid = GridSpec::line(2048, 40.0).unwrap();
    let norm_grid = GridSpec::line(1024, 16.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let coefs: Vec<(usize, C64)> = (0..6)
        .map(|n| {
            (
                n,
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    let psi_n = oscillator_superposition(&norm_grid, &coefs).normalized();
    let mut psi = ermakov_inverse(&psi_n, &sched.at(0.0).unwrap(), &lab_grid)
        .unwrap()
        .field;
    let pot = LabPotential::new(lat, ScalarPotential::Zero);
    let (mut fields, mut frames) = (vec![psi.clone()], vec![sched.at(0.0).unwrap()]);
    for k in 1..=4 {
        let t = 0.5 * k as f64;
        psi = evolve_lab(&psi, &pot, t, 1e-3).unwrap();
        fields.push(psi.clone());
        frames.push(sched.at(t).unwrap());
    }
    let rep = lewis_riesenfeld_check(&fields, &frames, &norm_grid, 20).unwrap();
    assert!(rep.total_drift < 1e-4, "{}", rep.total_drift);
    assert!(rep.max_drift() < 1e-4, "{}", rep.max_drift());
    let total: f64 = rep.populations[0].iter().sum();
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn inverse_square_equivalence_in_fodo() {
    let lat = common::fodo();
    // Lorentzian barriers leave exponential momentum tails that reach far
    // into the trap, so both boxes need room (lab box >= normalized * sqrt(beta_max)).
    let norm_grid = GridSpec::line(1024, 12.0).unwrap();
    let psi_n = gaussian(&norm_grid, [0.8, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let u = ScalarPotential::InverseSquare {
        strength: 0.5,
        eps: 0.5,
    };
    let d = common::equivalence_defects(
        &lat,
        matched_envelope(&lat).unwrap(),
        &u,
        &GridSpec::line(2048, 28.0).unwrap(),
        &psi_n,
        1e-3,
        &[0.75, 1.5, 2.25, 3.0],
    );
    assert!(d.iter().all(|x| *x < 1e-4), "{d:?}");
}

fn pauli_defect(cross: CrossTerm) -> f64 {
    let lat = common::fodo();
    let env0 = matched_envelope(&lat).unwrap();
    let sched = FrameSchedule::new(&lat, env0, 1.5).unwrap();
    let lab_grid = GridSpec::line(512, 20.0).unwrap();
    let norm_grid = GridSpec::line(512, 8.0).unwrap();
    let em = EMFieldSpec {
        a: VectorPotential::Radial {
            strength: 0.5,
            eps: 1.0,
        },
        ..Default::default()
    };
    let s = 1.0 / SQRT_2;
    let psi_n = gaussian(&norm_grid, [0.5, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let lab0 = ermakov_inverse(&psi_n, &sched.at(0.0).unwrap(), &lab_grid)
        .unwrap()
        .field;
    let mut lab = SpinorField::product(&lab0, [C64::new(s, 0.0), C64::new(s, 0.0)]);
    let mut nrm = ermakov_forward_spinor(&lab, &sched.at(0.0).unwrap(), &norm_grid)
        .unwrap()
        .field;
    let mut lp = PauliPropagator::new(&lab_grid, &lat, em.clone());
    let mut np = NormalizedPauliPropagator::new(&norm_grid, em, sched.track().clone(), cross);
    let f: TransformFrame = sched.at(1.5).unwrap();
    lp.advance(&mut lab, 1.5, 1e-3).unwrap();
    np.advance(&mut nrm, f.tau, 1e-3).unwrap();
    let mapped = ermakov_forward_spinor(&lab, &f, &norm_grid).unwrap().field;
    1.0 - mapped.fidelity(&nrm).unwrap()
}

#[test]
fn pauli_cross_term_from_expansion_is_required() {
    let derived = pauli_defect(CrossTerm::Derived);
    let printed = pauli_defect(CrossTerm::AsPrinted);
    let omitted = pauli_defect(CrossTerm::Omitted);
    assert!(derived < 1e-6, "derived {derived:.3e}");
    assert!(
        printed > 100.0 * derived,
        "printed {printed:.3e} vs derived {derived:.3e}"
    );
    assert!(omitted > printed, "omitted {omitted:.3e}");
}

#[test]
fn two_dimensional_oscillator_levels() {
    let v = |r: [f64; 2]| 0.5 * (r[0] * r[0] + r[1] * r[1]);
    let coarse = solve_stationary(v, &GridSpec::square(64, 6.0).unwrap(), 6).unwrap();
    let fine = solve_stationary(v, &GridSpec::square(128, 6.0).unwrap(), 6).unwrap();
    let expected = ermakov::scenario::oscillator_levels(2, 6);
    assert!((fine[0].0 - expected[0]).abs() < 2e-3, "{}", fine[0].0);
    for ((c, f), x) in coarse.iter().zip(&fine).zip(&expected) {
        let e = (4.0 * f.0 - c.0) / 3.0;
        assert!((e - x).abs() < 1e-3, "{e} vs {x}");
    }
}
