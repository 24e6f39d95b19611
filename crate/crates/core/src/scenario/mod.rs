//! Config-driven scenarios: parse a TOML file, validate it, run one kind of
//! experiment and write a report with every metric checked against the
//! configured tolerances.

mod config;
mod report;
mod run;

pub use config::{
    ClassicalConfig, Diagnostic, EnvelopeStart, GridConfig, InitialState, LatticeSource,
    NormalizedGrid, OutputConfig, PauliConfig, PerAxis, PopulationConfig, ScenarioConfig,
    ScenarioKind, SpectrumConfig, TimeConfig, Tolerances, VerifyConfig,
};
pub use report::{Bound, Check, Checkpoint, RunReport};
pub use run::{
    oscillator_levels, oscillator_superposition, precess, refined, run, transfer_between,
    SHRINK_FLOOR,
};
