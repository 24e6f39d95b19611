use std::path::{Path, PathBuf};
use std::process::Command;

use ermakov::scenario::{run, ScenarioConfig, ScenarioKind};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_file(configs_dir().join(name)).unwrap()
}

#[test]
fn every_example_config_passes() {
    let mut names: Vec<_> = std::fs::read_dir(configs_dir())
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for path in names {
        let config = ScenarioConfig::from_file(&path).unwrap();
        assert!(
            config.validate().is_empty(),
            "{}: {:?}",
            path.display(),
            config.validate()
        );
        let dir = tempfile::tempdir().unwrap();
        let report = run(&config, dir.path(), 7).unwrap();
        assert!(report.passed, "{}", report.summary());
        for f in &report.outputs {
            assert!(
                dir.path().join(f).exists(),
                "{} missing {f}",
                path.display()
            );
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(json["passed"], true);
        assert_eq!(json["kind"], config.kind.name());
    }
}

#[test]
fn same_seed_same_metrics() {
    let config = load("lr_fodo.toml");
    let a = run(&config, tempfile::tempdir().unwrap().path(), 11).unwrap();
    let b = run(&config, tempfile::tempdir().unwrap().path(), 11).unwrap();
    let c = run(&config, tempfile::tempdir().unwrap().path(), 12).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.checkpoints.len(), b.checkpoints.len());
    for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
        assert_eq!(x.metrics, y.metrics);
    }
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn config_round_trips_through_toml() {
    let config = load("verify_fodo.toml");
    let text = config.to_toml().unwrap();
    let back = ScenarioConfig::from_toml_str(&text, configs_dir()).unwrap();
    assert_eq!(back.kind, ScenarioKind::VerifyEquivalence);
    assert_eq!(back.to_toml().unwrap(), text);
}

#[test]
fn validation_names_fields() {
    let text = r#"
kind = "evolve-lab"
lattice = "nowhere.lat"

[grid]
n = 100
l_half = 10.0

[initial]
kind = "gaussian"
center = [0.0, 0.0]
sigma = -1.0
k = [0.0, 0.0]

[time]
t_end = 1.0
dt = 0.0

[tolerances]
norm_drift = -1.0
energy = 1e-3
"#;
    let config = ScenarioConfig::from_toml_str(text, configs_dir()).unwrap();
    let diags = config.validate();
    let fields: Vec<&str> = diags.iter().map(|d| d.field.as_str()).collect();
    for f in ["lattice", "grid", "initial", "time", "tolerances"] {
        assert!(
            fields.iter().any(|x| x.starts_with(f)),
            "{f} not in {diags:?}"
        );
    }
    assert!(diags.iter().any(|d| d.message.contains("nowhere.lat")));
    let err = run(&config, tempfile::tempdir().unwrap().path(), 0).unwrap_err();
    assert!(matches!(err, ermakov::Error::Config(_)), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "kind = \"spectrum\"\nbogus = 1\n";
    assert!(ScenarioConfig::from_toml_str(text, ".").is_err());
}

#[test]
fn pauli_run_requires_fields() {
    let mut config = load("pauli_uniform.toml");
    config.em = None;
    assert!(config.validate().iter().any(|d| d.field.starts_with("em")));
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ermakov"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let env = configs_dir().join("envelope_fodo.toml");
    let env = env.to_str().unwrap();
    assert_eq!(
        cli(&["envelope", "--config", env, "--out", out, "--seed", "3"]),
        0
    );
    assert!(dir.path().join("report.json").exists());

    // same config under the wrong subcommand
    assert_eq!(cli(&["track", "--config", env, "--out", out]), 2);
    assert_eq!(
        cli(&["envelope", "--config", "/does/not/exist.toml", "--out", out]),
        2
    );

    let strict = std::fs::read_to_string(configs_dir().join("evolve_free.toml"))
        .unwrap()
        .replace("ehrenfest = 1e-8", "ehrenfest = 1e-300");
    let path = dir.path().join("strict.toml");
    std::fs::write(&path, strict).unwrap();
    assert_eq!(
        cli(&["evolve", "--config", path.to_str().unwrap(), "--out", out]),
        1
    );
}
