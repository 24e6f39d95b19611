//! Acceptance criteria A1 to A8. Each test prints one `A<n> PASS|FAIL` line
//! straight to stdout so the verdicts show up without `--nocapture`.

mod common;

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use ermakov::fields::{gaussian, GridSpec, SpinorField, C64};
use ermakov::lattice::{
    matched_envelope, propagate_envelope, EnvelopeFrame, EnvelopeTrack, LatticeSpec,
};
use ermakov::pauli::{
    transform_em, CrossTerm, EMFieldSpec, MagneticField, NormalizedPauliPropagator,
    PauliPropagator, VectorPotential,
};
use ermakov::potential::ScalarPotential;
use ermakov::reference::{drift_beta, lewis_riesenfeld_check, track_residual, OSCILLATOR_LENGTH};
use ermakov::scenario::{oscillator_superposition, run, RunReport, ScenarioConfig};
use ermakov::schrodinger::{
    evolve_lab, richardson, solve_stationary, LabPotential, LabPropagator, NormalizedPropagator,
};
use ermakov::transform::{ermakov_inverse, normalized_potential, FrameSchedule, TransformFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, passed: bool, detail: &str) {
    let word = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{id} {word} {detail}");
    assert!(passed, "{id}: {detail}");
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn run_config(config: &ScenarioConfig) -> RunReport {
    let diags = config.validate();
    assert!(diags.is_empty(), "{diags:?}");
    let dir = tempfile::tempdir().unwrap();
    run(config, dir.path(), 2026).unwrap()
}

fn check_ok(report: &RunReport, metric: &str) -> bool {
    report.checks.iter().any(|c| c.metric == metric && c.passed)
}

#[test]
fn a1_envelope() {
    let drift = LatticeSpec::constant(0.0, 5.0).unwrap();
    let track = EnvelopeTrack::new(&drift, EnvelopeFrame::new(0.0, 1.0, 0.0), 5.0).unwrap();
    let drift_err = (0..=500)
        .map(|i| {
            let t = 0.01 * i as f64;
            (track.beta_at(t).unwrap().0 - drift_beta(t).0).abs()
        })
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let (mut residual, mut periodicity) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let lat = common::random_stable_lattice(&mut rng);
        let m0 = matched_envelope(&lat).unwrap();
        let end = propagate_envelope(&m0, &lat, lat.period()).unwrap();
        periodicity = periodicity
            .max((end.beta - m0.beta).abs() / m0.beta)
            .max((end.dbeta - m0.dbeta).abs() / (1.0 + m0.dbeta.abs()));
        let track = EnvelopeTrack::new(&lat, m0, lat.period()).unwrap();
        residual = residual.max(track_residual(&track, 100).unwrap());
    }
    let passed = drift_err <= 1e-10 && residual < 1e-6 && periodicity < 1e-8;
    verdict(
        "A1",
        passed,
        &format!(
            "drift |beta - (1 + t^2)| {drift_err:.2e} <= 1e-10; 20 lattices: residual {residual:.2e} < 1e-6, periodicity {periodicity:.2e} < 1e-8"
        ),
    );
}

const CONSTANT_CELL: &str = r#"
id = "a2-constant"
kind = "verify-equivalence"
lattice = { segments = [[1.0, 3.0]] }

[grid]
n = 1024
l_half = 16.0

[initial]
kind = "gaussian"
center = [1.0, 0.0]
sigma = 1.189207115002721

[time]
t_end = 3.0
dt = 5e-4
n_checkpoints = 6

[verify]
refine = true

[tolerances]
fidelity_defect = 1e-4
shrink_factor = 3.0
"#;

const FODO_CELL: &str = r#"
id = "a2-fodo"
kind = "verify-equivalence"
lattice = "fodo.lat"

[grid]
n = 1024
l_half = 16.0

[normalized_grid]
mode = "explicit"
n = 1024
l_half = 8.0

[initial]
kind = "oscillator"
modes = [[0, 0.8, 0.0], [1, 0.6, 0.0]]

[time]
t_end = 3.0
dt = 5e-4
n_checkpoints = 6

[verify]
refine = true

[tolerances]
fidelity_defect = 1e-4
shrink_factor = 3.0
"#;

#[test]
fn a2_equivalence() {
    let cases = [
        ScenarioConfig::from_toml_str(CONSTANT_CELL, configs_dir()).unwrap(),
        ScenarioConfig::from_toml_str(FODO_CELL, configs_dir()).unwrap(),
        ScenarioConfig::from_file(configs_dir().join("verify_inverse_square.toml")).unwrap(),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for config in &cases {
        let grid = config.grid.as_ref().unwrap().build().unwrap();
        let time = config.time.as_ref().unwrap();
        assert_eq!(grid.axis(0).n, 1024);
        assert_eq!(time.dt, 5e-4);
        let period = config.lattice().unwrap().period();
        let per_period = time.checkpoint_times().len() as f64 * period / time.t_end;
        let report = run_config(config);
        let ok = check_ok(&report, "fidelity_defect")
            && check_ok(&report, "shrink_factor")
            && per_period >= 5.0;
        passed &= ok;
        parts.push(format!(
            "{}: defect {:.2e}, refined {:.2e}",
            report.id,
            report.metric("fidelity_defect").unwrap_or(f64::NAN),
            report.metric("fidelity_defect_refined").unwrap_or(f64::NAN),
        ));
    }
    verdict(
        "A2",
        passed,
        &format!(
            "{} (<= 1e-4, shrink >= 3x or below round-off)",
            parts.join("; ")
        ),
    );
}

#[test]
fn a3_width_law() {
    let lat = LatticeSpec::constant(0.0, 2.0).unwrap();
    let grid = GridSpec::line(1024, 30.0).unwrap();
    let mut psi = gaussian(&grid, [0.0, 0.0], OSCILLATOR_LENGTH, [0.0, 0.0]);
    let xn2 = psi.expect_r2();
    let pot = LabPotential::new(lat, ScalarPotential::Zero);
    let mut worst = 0.0f64;
    for k in 1..=20 {
        let t = 0.1 * k as f64;
        psi = evolve_lab(&psi, &pot, t, 1e-3).unwrap();
        worst = worst.max((psi.expect_r2() / (drift_beta(t).0 * xn2) - 1.0).abs());
    }
    verdict(
        "A3",
        worst <= 1e-4,
        &format!("<x^2>/(beta <x_N^2>) - 1 over [0, 2]: {worst:.2e} <= 1e-4"),
    );
}

#[test]
fn a4_spectrum() {
    let v = |r: [f64; 2]| 0.5 * r[0] * r[0];
    let coarse = solve_stationary(v, &GridSpec::line(512, 10.0).unwrap(), 2).unwrap();
    let fine = solve_stationary(v, &GridSpec::line(1024, 10.0).unwrap(), 2).unwrap();
    let e0 = 1.0 / SQRT_2;
    let err = (coarse[0].0 - e0).abs();
    let err_r = (richardson(coarse[0].0, fine[0].0) - e0).abs();
    let spacing = (coarse[1].0 - coarse[0].0 - SQRT_2).abs();
    verdict(
        "A4",
        err <= 2e-3 && err_r <= 2e-4 && spacing <= 5e-3,
        &format!("E0 error {err:.2e} <= 2e-3, Richardson {err_r:.2e} <= 2e-4, spacing error {spacing:.2e} <= 5e-3"),
    );
}

#[test]
fn a5_lewis_riesenfeld() {
    let lat = common::fodo();
    let sched = FrameSchedule::new(&lat, matched_envelope(&lat).unwrap(), lat.period()).unwrap();
    let lab_grid = GridSpec::line(1024, 20.0).unwrap();
    let norm_grid = GridSpec::line(512, 10.0).unwrap();
    let s = 1.0 / SQRT_2;
    let psi_n =
        oscillator_superposition(&norm_grid, &[(0, C64::new(s, 0.0)), (1, C64::new(s, 0.0))]);
    let mut psi = ermakov_inverse(&psi_n, &sched.at(0.0).unwrap(), &lab_grid)
        .unwrap()
        .field;
    let pot = LabPotential::new(lat.clone(), ScalarPotential::Zero);
    let (mut fields, mut frames) = (vec![psi.clone()], vec![sched.at(0.0).unwrap()]);
    for k in 1..=12 {
        let t = lat.period() * k as f64 / 12.0;
        psi = evolve_lab(&psi, &pot, t, 5e-4).unwrap();
        fields.push(psi.clone());
        frames.push(sched.at(t).unwrap());
    }
    let rep = lewis_riesenfeld_check(&fields, &frames, &norm_grid, 8).unwrap();
    let drift = rep.max_drift();
    verdict(
        "A5",
        drift <= 1e-4,
        &format!("FODO (n0 + n1)/sqrt 2 population drift over one cell {drift:.2e} <= 1e-4"),
    );
}

#[test]
fn a6_classical_invariants() {
    let cs = common::cs_drift(&common::fodo(), 1000);
    let (q1, q2) = (common::quartic_drift(200), common::quartic_drift(400));
    let ratio = q1 / q2;
    verdict(
        "A6",
        cs < 1e-6 && q1 < 1e-5 && (ratio - 4.0).abs() <= 0.3,
        &format!("CS drift 100 turns {cs:.2e} < 1e-6; quartic drift 1000 turns {q1:.2e} < 1e-5, halving ratio {ratio:.3} (4 +- 0.3)"),
    );
}

const PAULI_2D: &str = r#"
id = "a7-2d"
kind = "verify-pauli"
lattice = { segments = [[4.0, 1.0]] }

[grid]
dim = 2
n = 256
l_half = 5.656854249492381

[normalized_grid]
mode = "image"

[em]
b = { kind = "inverse-square", b = [0.0, 0.0, 1.0], eps = 0.25 }

[initial]
kind = "gaussian"
center = [0.5, 0.3]
sigma = 0.8

[time]
t_end = 1.0
dt = 1e-3

[tolerances]
fidelity_defect = 1e-3
"#;

#[test]
fn a7_pauli_scaling() {
    // identities for the invariant classes, at random frames and points
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut identity = 0.0f64;
    for _ in 0..1000 {
        let frame = TransformFrame {
            t: 0.0,
            beta: rng.random_range(0.05..20.0),
            dbeta: rng.random_range(-2.0..2.0),
            tau: 0.0,
        };
        let a = rng.random_range(-3.0..3.0);
        let em = EMFieldSpec {
            u: ScalarPotential::InverseSquare {
                strength: a,
                eps: 0.0,
            },
            a: VectorPotential::Directional {
                dir: [0.6, 0.8],
                strength: a,
                eps: 0.0,
            },
            b: MagneticField::InverseSquare {
                b: [0.1, -0.2, a],
                eps: 0.0,
            },
            ..Default::default()
        };
        let emn = transform_em(&em, &frame);
        let r = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
        identity = identity.max(rel(emn.u.value(r, 0.0), em.u.value(r, 0.0)));
        let (an, al) = (emn.a.value(r, 0.0), em.a.value(r, 0.0));
        let (bn, bl) = (emn.b.value(r, 0.0), em.b.value(r, 0.0));
        identity = identity.max(rel(an[0], al[0])).max(rel(an[1], al[1]));
        identity = (0..3).fold(identity, |m, i| m.max(rel(bn[i], bl[i])));
    }

    let cross = run_config(&ScenarioConfig::from_toml_str(PAULI_2D, configs_dir()).unwrap());
    let uniform =
        run_config(&ScenarioConfig::from_file(configs_dir().join("pauli_uniform.toml")).unwrap());
    let defect = cross.metric("fidelity_defect").unwrap_or(f64::NAN);
    let prec = uniform.metric("precession").unwrap_or(f64::NAN);
    verdict(
        "A7",
        identity <= 1e-14 && defect <= 1e-3 && prec <= 1e-6,
        &format!("identities {identity:.1e} <= 1e-14; 2D 256^2 inverse-square B defect {defect:.2e} <= 1e-3; uniform-B precession {prec:.2e} <= 1e-6"),
    );
}

#[test]
fn a8_unitarity() {
    const STEPS: f64 = 1000.0;
    let dt = 1e-3;
    let lat = common::fodo();
    let sched = FrameSchedule::new(&lat, matched_envelope(&lat).unwrap(), 20.0).unwrap();
    let line = GridSpec::line(512, 16.0).unwrap();
    let u = ScalarPotential::InverseSquare {
        strength: 0.3,
        eps: 0.5,
    };

    let mut drifts = Vec::new();
    let psi0 = gaussian(&line, [0.5, 0.0], 1.0, [0.3, 0.0]);
    let mut psi = psi0.clone();
    LabPropagator::new(&line, LabPotential::new(lat.clone(), u.clone()))
        .advance(&mut psi, STEPS * dt, dt)
        .unwrap();
    drifts.push(("lab", (psi.norm2() - psi0.norm2()).abs()));

    let mut psi = psi0.clone();
    NormalizedPropagator::new(&line, normalized_potential(&u, &sched))
        .advance(&mut psi, STEPS * dt, dt)
        .unwrap();
    drifts.push(("normalized", (psi.norm2() - psi0.norm2()).abs()));

    let square = GridSpec::square(64, 8.0).unwrap();
    let em = EMFieldSpec {
        u,
        a: VectorPotential::Azimuthal {
            strength: 0.4,
            eps: 0.5,
        },
        b: MagneticField::InverseSquare {
            b: [0.2, 0.0, 1.0],
            eps: 0.5,
        },
        ..Default::default()
    };
    let s = 1.0 / SQRT_2;
    let spinor0 = SpinorField::product(
        &gaussian(&square, [0.5, -0.2], 1.0, [0.2, 0.1]),
        [C64::new(s, 0.0), C64::new(0.0, s)],
    );
    let mut sp = spinor0.clone();
    PauliPropagator::new(&square, &lat, em.clone())
        .advance(&mut sp, STEPS * dt, dt)
        .unwrap();
    drifts.push(("pauli lab", (sp.norm2() - spinor0.norm2()).abs()));

    let mut sp = spinor0.clone();
    NormalizedPauliPropagator::new(&square, em, sched.track().clone(), CrossTerm::Derived)
        .advance(&mut sp, STEPS * dt, dt)
        .unwrap();
    drifts.push(("pauli normalized", (sp.norm2() - spinor0.norm2()).abs()));

    let worst = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    let detail: Vec<String> = drifts.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect();
    verdict(
        "A8",
        worst <= 1e-10,
        &format!(
            "norm drift per 1000 steps: {} (<= 1e-10)",
            detail.join(", ")
        ),
    );
}
