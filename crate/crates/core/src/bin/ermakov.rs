//! Command-line front end: one subcommand per scenario family.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ermakov::scenario::{run, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "ermakov",
    version,
    about = "Envelope, tracking and normalized-frame wave-equation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Matched or transported envelope of a lattice.
    Envelope(Common),
    /// Symplectic particle tracking.
    Track(Common),
    /// Split-step evolution in the lab or normalized frame.
    Evolve(Common),
    /// Forward and inverse transform along a lab evolution.
    Transform(Common),
    /// Lab versus normalized evolution of the scalar equation.
    Verify(Common),
    /// Lab versus normalized evolution of the Pauli equation.
    Pauli(Common),
    /// Stationary states of the normalized Hamiltonian.
    Spectrum(Common),
    /// Oscillator-mode populations along a free lab evolution.
    LrCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Validate the config and exit.
    #[arg(long)]
    check: bool,
}

impl Command {
    fn parts(&self) -> (&'static str, &[ScenarioKind], &Common) {
        use ScenarioKind::*;
        match self {
            Self::Envelope(c) => ("envelope", &[Envelope], c),
            Self::Track(c) => ("track", &[Track], c),
            Self::Evolve(c) => ("evolve", &[EvolveLab, EvolveNormalized], c),
            Self::Transform(c) => ("transform", &[Transform], c),
            Self::Verify(c) => ("verify", &[VerifyEquivalence], c),
            Self::Pauli(c) => ("pauli", &[VerifyPauli], c),
            Self::Spectrum(c) => ("spectrum", &[Spectrum], c),
            Self::LrCheck(c) => ("lr-check", &[LewisRiesenfeld], c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, kinds, args) = cli.command.parts();
    let config = match ScenarioConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if !kinds.contains(&config.kind) {
        eprintln!(
            "error: `{name}` cannot run a scenario of kind `{}`",
            config.kind
        );
        return ExitCode::from(2);
    }
    let diagnostics = config.validate();
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("invalid config: {d}");
        }
        return ExitCode::from(2);
    }
    if args.check {
        println!("{}: config ok", args.config.display());
        return ExitCode::SUCCESS;
    }
    eprintln!("[{name}] running {} -> {}", config.id(), args.out.display());
    match run(&config, &args.out, args.seed) {
        Ok(report) => {
            print!("{}", report.summary());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
