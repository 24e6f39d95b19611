//! Load a scenario file and run it.
//!
//!     cargo run --example run_scenario -- examples/configs/verify_fodo.toml out/verify 7

use std::path::PathBuf;

use ermakov::scenario::{run, ScenarioConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let config_path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/envelope_fodo.toml")
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ermakov-run"));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let config = match ScenarioConfig::from_file(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("[run] {e}");
            std::process::exit(2);
        }
    };
    for d in config.validate() {
        eprintln!("[run] invalid: {d}");
    }
    println!(
        "[run] {} ({}) seed {seed} -> {}",
        config.id(),
        config.kind.name(),
        out.display()
    );
    match run(&config, &out, seed) {
        Ok(report) => {
            print!("{}", report.summary());
            println!("[run] wrote {}", report.outputs.join(", "));
            std::process::exit(if report.passed { 0 } else { 1 });
        }
        Err(e) => {
            eprintln!("[run] failed: {e}");
            std::process::exit(2);
        }
    }
}
