//! Scenario files: one TOML document per run.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classical::{PotentialSpec, Record};
use crate::error::{Error, Result};
use crate::fields::{Axis, GridSpec, MIN_AXIS_POINTS};
use crate::lattice::{matched_envelope, EnvelopeFrame, LatticeSpec};
use crate::pauli::{CrossTerm, EMFieldSpec};
use crate::potential::ScalarPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Envelope,
    Track,
    EvolveLab,
    EvolveNormalized,
    Transform,
    VerifyEquivalence,
    VerifyPauli,
    Spectrum,
    LewisRiesenfeld,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Envelope => "envelope",
            Self::Track => "track",
            Self::EvolveLab => "evolve-lab",
            Self::EvolveNormalized => "evolve-normalized",
            Self::Transform => "transform",
            Self::VerifyEquivalence => "verify-equivalence",
            Self::VerifyPauli => "verify-pauli",
            Self::Spectrum => "spectrum",
            Self::LewisRiesenfeld => "lewis-riesenfeld",
        }
    }

    /// Tolerance keys whose metrics this kind produces.
    pub fn tolerance_keys(self) -> &'static [&'static str] {
        match self {
            Self::Envelope => &["periodicity", "envelope_residual"],
            Self::Track => &["invariant_drift", "hamiltonian_drift", "min_improvement"],
            Self::EvolveLab => &["norm_drift", "ehrenfest"],
            Self::EvolveNormalized => &["norm_drift"],
            Self::Transform => &["norm_error", "round_trip", "width_law"],
            Self::VerifyEquivalence => &["fidelity_defect", "norm_drift", "shrink_factor"],
            Self::VerifyPauli => &["fidelity_defect", "norm_drift", "spin_bound", "precession"],
            Self::Spectrum => &["energy", "spacing"],
            Self::LewisRiesenfeld => &["population_drift", "total_drift"],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A lattice given by file path or inline `[K, L]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeSource {
    File(PathBuf),
    Inline { segments: Vec<[f64; 2]> },
}

/// Where the envelope starts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EnvelopeStart {
    /// Periodic solution of the lattice, at `s = 0`.
    #[default]
    Matched,
    Explicit {
        beta: f64,
        #[serde(default)]
        dbeta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    One(T),
    Each(Vec<T>),
}

impl<T: Copy> PerAxis<T> {
    fn get(&self, axis: usize) -> Option<T> {
        match self {
            Self::One(v) => Some(*v),
            Self::Each(v) => v.get(axis).copied(),
        }
    }
}

fn default_dim() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: PerAxis<usize>,
    pub l_half: PerAxis<f64>,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        let axes = (0..self.dim)
            .map(|i| {
                Ok(Axis {
                    n: self
                        .n
                        .get(i)
                        .ok_or_else(|| cfg(format!("grid.n has no entry for axis {i}")))?,
                    l_half: self
                        .l_half
                        .get(i)
                        .ok_or_else(|| cfg(format!("grid.l_half has no entry for axis {i}")))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GridSpec::new(axes)
    }

    fn diagnose(&self, prefix: &str, out: &mut Vec<Diagnostic>) {
        if !(1..=2).contains(&self.dim) {
            out.push(Diagnostic::new(
                format!("{prefix}.dim"),
                format!("dimension {} is not 1 or 2", self.dim),
            ));
            return;
        }
        for axis in 0..self.dim {
            match self.n.get(axis) {
                None => out.push(Diagnostic::new(
                    format!("{prefix}.n"),
                    format!("missing entry for axis {axis}"),
                )),
                Some(n) if !n.is_power_of_two() || n < MIN_AXIS_POINTS => {
                    out.push(Diagnostic::new(
                        format!("{prefix}.n"),
                        format!("axis {axis}: n = {n} must be a power of two >= {MIN_AXIS_POINTS}"),
                    ))
                }
                _ => {}
            }
            match self.l_half.get(axis) {
                None => out.push(Diagnostic::new(
                    format!("{prefix}.l_half"),
                    format!("missing entry for axis {axis}"),
                )),
                Some(l) if !(l > 0.0 && l.is_finite()) => out.push(Diagnostic::new(
                    format!("{prefix}.l_half"),
                    format!("axis {axis}: half-width {l} must be positive"),
                )),
                _ => {}
            }
        }
    }
}

/// Grid for normalized-frame fields.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NormalizedGrid {
    /// Same nodes as the lab grid.
    #[default]
    Same,
    /// Lab grid scaled by `1/√β₀`, so lab nodes map onto normalized nodes
    /// whenever `β = β₀`.
    Image,
    Explicit {
        #[serde(default = "default_dim")]
        dim: usize,
        n: PerAxis<usize>,
        l_half: PerAxis<f64>,
    },
}

/// Initial quantum state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    /// Normalized Gaussian `exp(−|r−c|²/(2σ²) + i k·r)` on the lab grid.
    Gaussian {
        #[serde(default)]
        center: [f64; 2],
        sigma: f64,
        #[serde(default)]
        k: [f64; 2],
    },
    /// Superposition of 1D oscillator modes in the normalized frame;
    /// entries are `[n, re, im]`.
    Oscillator { modes: Vec<[f64; 3]> },
    /// Seeded random coefficients on the first `modes` oscillator modes in
    /// the normalized frame.
    RandomSmooth { modes: usize },
    /// Equal superposition of eigenstates of `−∇² + r²/2 + W` on the
    /// normalized grid, where `W` is the normalized image of the scenario
    /// potential at the start.
    Stationary { states: Vec<usize> },
    /// A lab-frame snapshot file.
    Snapshot { path: PathBuf },
}

impl InitialState {
    /// True when the state is defined in the normalized frame.
    pub fn is_normalized(&self) -> bool {
        matches!(
            self,
            Self::Oscillator { .. } | Self::RandomSmooth { .. } | Self::Stationary { .. }
        )
    }
}

fn default_checkpoints() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Explicit checkpoint times; otherwise `n_checkpoints` evenly spaced
    /// times ending at `t_end`.
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default = "default_checkpoints")]
    pub n_checkpoints: usize,
}

impl TimeConfig {
    pub fn checkpoint_times(&self) -> Vec<f64> {
        match &self.checkpoints {
            Some(c) => c.clone(),
            None => (1..=self.n_checkpoints)
                .map(|i| self.t_end * i as f64 / self.n_checkpoints as f64)
                .collect(),
        }
    }
}

fn default_steps() -> usize {
    1000
}

fn default_periods() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    /// `[x, px, y, py]` at `s = 0`.
    pub initial: [f64; 4],
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default = "default_steps")]
    pub steps_per_segment: usize,
    #[serde(default)]
    pub record: Record,
    /// Re-run at twice the steps and report the drift improvement.
    #[serde(default)]
    pub halving: bool,
}

fn default_states() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_states")]
    pub n_states: usize,
    /// Also solve at twice the resolution and extrapolate.
    #[serde(default)]
    pub richardson: bool,
    /// Reference energies; defaults to the oscillator levels when the
    /// extra potential is zero.
    #[serde(default)]
    pub expected: Option<Vec<f64>>,
}

fn default_modes() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    #[serde(default = "default_modes")]
    pub n_modes: usize,
}

fn default_spin() -> [[f64; 2]; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[s, 0.0], [s, 0.0]]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliConfig {
    /// Spin state `[[re, im], [re, im]]` multiplying the scalar initial state.
    #[serde(default = "default_spin")]
    pub spin: [[f64; 2]; 2],
    #[serde(default)]
    pub cross_term: CrossTerm,
}

impl Default for PauliConfig {
    fn default() -> Self {
        Self {
            spin: default_spin(),
            cross_term: CrossTerm::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Repeat with twice the nodes per axis and half the step.
    #[serde(default)]
    pub refine: bool,
    /// Also run with the opposite sign of the quadratic phase.
    #[serde(default = "yes")]
    pub check_phase_sign: bool,
}

fn yes() -> bool {
    true
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            refine: false,
            check_phase_sign: true,
        }
    }
}

/// Pass/fail thresholds. Every metric that gates a run is listed here; a
/// metric without a configured threshold is reported but does not gate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub periodicity: Option<f64>,
    pub envelope_residual: Option<f64>,
    pub invariant_drift: Option<f64>,
    pub hamiltonian_drift: Option<f64>,
    pub min_improvement: Option<f64>,
    pub norm_drift: Option<f64>,
    pub ehrenfest: Option<f64>,
    pub norm_error: Option<f64>,
    pub round_trip: Option<f64>,
    pub width_law: Option<f64>,
    pub fidelity_defect: Option<f64>,
    pub shrink_factor: Option<f64>,
    pub spin_bound: Option<f64>,
    pub precession: Option<f64>,
    pub energy: Option<f64>,
    pub spacing: Option<f64>,
    pub population_drift: Option<f64>,
    pub total_drift: Option<f64>,
}

impl Tolerances {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let all = [
            ("periodicity", self.periodicity),
            ("envelope_residual", self.envelope_residual),
            ("invariant_drift", self.invariant_drift),
            ("hamiltonian_drift", self.hamiltonian_drift),
            ("min_improvement", self.min_improvement),
            ("norm_drift", self.norm_drift),
            ("ehrenfest", self.ehrenfest),
            ("norm_error", self.norm_error),
            ("round_trip", self.round_trip),
            ("width_law", self.width_law),
            ("fidelity_defect", self.fidelity_defect),
            ("shrink_factor", self.shrink_factor),
            ("spin_bound", self.spin_bound),
            ("precession", self.precession),
            ("energy", self.energy),
            ("spacing", self.spacing),
            ("population_drift", self.population_drift),
            ("total_drift", self.total_drift),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write binary field snapshots at every checkpoint.
    #[serde(default = "yes")]
    pub snapshots: bool,
    /// Envelope samples per lattice segment in CSV output.
    #[serde(default = "default_samples")]
    pub samples_per_segment: usize,
}

fn default_samples() -> usize {
    20
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshots: true,
            samples_per_segment: default_samples(),
        }
    }
}

/// One scenario. Paths are resolved relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub lattice: Option<LatticeSource>,
    #[serde(default)]
    pub envelope: EnvelopeStart,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub normalized_grid: NormalizedGrid,
    #[serde(default)]
    pub potential: ScalarPotential,
    #[serde(default)]
    pub em: Option<EMFieldSpec>,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub classical: Option<ClassicalConfig>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub populations: Option<PopulationConfig>,
    #[serde(default)]
    pub pauli: Option<PauliConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// A field-level validation message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        c.base_dir = base_dir.into();
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut c = Self::from_toml_str(&text, base)?;
        if c.id.is_none() {
            c.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg(e.to_string()))
    }

    pub fn id(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        match &self.lattice {
            None => Err(cfg("lattice: required for this scenario kind")),
            Some(LatticeSource::File(p)) => LatticeSpec::from_file(self.resolve(p)),
            Some(LatticeSource::Inline { segments }) => {
                let pairs: Vec<(f64, f64)> = segments.iter().map(|s| (s[0], s[1])).collect();
                LatticeSpec::from_pairs(&pairs)
            }
        }
    }

    /// Envelope frame at `s = 0`.
    pub fn envelope_start(&self, lattice: &LatticeSpec) -> Result<EnvelopeFrame> {
        match self.envelope {
            EnvelopeStart::Matched => matched_envelope(lattice),
            EnvelopeStart::Explicit { beta, dbeta } => Ok(EnvelopeFrame::new(0.0, beta, dbeta)),
        }
    }

    pub fn lab_grid(&self) -> Result<GridSpec> {
        self.grid
            .as_ref()
            .ok_or_else(|| cfg("grid: required for this scenario kind"))?
            .build()
    }

    /// Normalized grid for a lab grid and starting envelope value `beta0`.
    pub fn normalized_grid(&self, lab: &GridSpec, beta0: f64) -> Result<GridSpec> {
        match &self.normalized_grid {
            NormalizedGrid::Same => Ok(lab.clone()),
            NormalizedGrid::Image => lab.scaled(1.0 / beta0.sqrt()),
            NormalizedGrid::Explicit { dim, n, l_half } => GridConfig {
                dim: *dim,
                n: n.clone(),
                l_half: l_half.clone(),
            }
            .build(),
        }
    }

    fn needs(&self) -> Needs {
        use ScenarioKind::*;
        let quantum = matches!(
            self.kind,
            EvolveLab
                | EvolveNormalized
                | Transform
                | VerifyEquivalence
                | VerifyPauli
                | LewisRiesenfeld
        );
        Needs {
            lattice: !matches!(self.kind, Spectrum),
            grid: quantum || matches!(self.kind, Spectrum),
            initial: quantum,
            time: quantum,
            classical: matches!(self.kind, Track),
            em: matches!(self.kind, VerifyPauli),
        }
    }

    /// Every reason the run would refuse to start; empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let needs = self.needs();
        let mut lattice = None;
        if needs.lattice {
            match &self.lattice {
                None => out.push(Diagnostic::new(
                    "lattice",
                    "required for this scenario kind",
                )),
                Some(LatticeSource::File(p)) => {
                    let path = self.resolve(p);
                    if !path.is_file() {
                        out.push(Diagnostic::new(
                            "lattice",
                            format!("file not found: {}", path.display()),
                        ));
                    } else {
                        match self.lattice() {
                            Ok(l) => lattice = Some(l),
                            Err(e) => out.push(Diagnostic::new("lattice", e.to_string())),
                        }
                    }
                }
                Some(LatticeSource::Inline { .. }) => match self.lattice() {
                    Ok(l) => lattice = Some(l),
                    Err(e) => out.push(Diagnostic::new("lattice", e.to_string())),
                },
            }
        }
        if let Some(l) = &lattice {
            if let Err(e) = self.envelope_start(l) {
                out.push(Diagnostic::new("envelope", e.to_string()));
            } else if let EnvelopeStart::Explicit { beta, dbeta } = self.envelope {
                if !(beta > 0.0 && beta.is_finite() && dbeta.is_finite()) {
                    out.push(Diagnostic::new(
                        "envelope.beta",
                        format!("beta = {beta} must be finite and > 0"),
                    ));
                }
            }
        }
        match (&self.grid, needs.grid) {
            (None, true) => out.push(Diagnostic::new("grid", "required for this scenario kind")),
            (Some(g), _) => g.diagnose("grid", &mut out),
            _ => {}
        }
        if let NormalizedGrid::Explicit { dim, n, l_half } = &self.normalized_grid {
            GridConfig {
                dim: *dim,
                n: n.clone(),
                l_half: l_half.clone(),
            }
            .diagnose("normalized_grid", &mut out);
        }
        if needs.initial {
            match &self.initial {
                None => out.push(Diagnostic::new(
                    "initial",
                    "required for this scenario kind",
                )),
                Some(init) => self.diagnose_initial(init, &mut out),
            }
        }
        if needs.time {
            match &self.time {
                None => out.push(Diagnostic::new("time", "required for this scenario kind")),
                Some(t) => diagnose_time(t, &mut out),
            }
        }
        if needs.classical {
            match &self.classical {
                None => out.push(Diagnostic::new(
                    "classical",
                    "required for this scenario kind",
                )),
                Some(c) => {
                    if c.steps_per_segment == 0 {
                        out.push(Diagnostic::new(
                            "classical.steps_per_segment",
                            "must be >= 1",
                        ));
                    }
                    if c.initial.iter().any(|v| !v.is_finite()) {
                        out.push(Diagnostic::new(
                            "classical.initial",
                            "all components must be finite",
                        ));
                    }
                }
            }
        }
        if needs.em && self.em.is_none() {
            out.push(Diagnostic::new("em", "required for this scenario kind"));
        }
        if needs.em && !self.potential.is_zero() {
            out.push(Diagnostic::new(
                "potential",
                "Pauli runs take the scalar potential from em.u",
            ));
        }
        if let Some(p) = &self.pauli {
            let n: f64 = p.spin.iter().flatten().map(|v| v * v).sum();
            if !(n > 0.0 && n.is_finite()) {
                out.push(Diagnostic::new(
                    "pauli.spin",
                    "spin state must be finite and nonzero",
                ));
            }
        }
        if matches!(self.kind, ScenarioKind::LewisRiesenfeld) && !self.potential.is_zero() {
            out.push(Diagnostic::new(
                "potential",
                "population invariance holds only without an extra potential",
            ));
        }
        if matches!(
            self.kind,
            ScenarioKind::LewisRiesenfeld | ScenarioKind::Spectrum
        ) {
            if let Some(g) = &self.grid {
                if matches!(self.kind, ScenarioKind::LewisRiesenfeld) && g.dim != 1 {
                    out.push(Diagnostic::new(
                        "grid.dim",
                        "population check runs on 1D grids",
                    ));
                }
            }
        }
        let allowed = self.kind.tolerance_keys();
        for (key, value) in self.tolerances.entries() {
            if !allowed.contains(&key) {
                out.push(Diagnostic::new(
                    format!("tolerances.{key}"),
                    format!(
                        "not produced by kind {}; it would never be checked",
                        self.kind
                    ),
                ));
            } else if !(value > 0.0 && value.is_finite()) {
                out.push(Diagnostic::new(
                    format!("tolerances.{key}"),
                    format!("{value} must be positive"),
                ));
            }
        }
        out
    }

    fn diagnose_initial(&self, init: &InitialState, out: &mut Vec<Diagnostic>) {
        match init {
            InitialState::Gaussian { sigma, .. } if !(*sigma > 0.0) => out.push(Diagnostic::new(
                "initial.sigma",
                format!("{sigma} must be > 0"),
            )),
            InitialState::Oscillator { modes } => {
                if modes.is_empty() {
                    out.push(Diagnostic::new(
                        "initial.modes",
                        "needs at least one [n, re, im] entry",
                    ));
                }
                if modes.iter().any(|m| m[0] < 0.0 || m[0].fract() != 0.0) {
                    out.push(Diagnostic::new(
                        "initial.modes",
                        "mode indices must be non-negative integers",
                    ));
                }
            }
            InitialState::RandomSmooth { modes } if *modes == 0 => {
                out.push(Diagnostic::new("initial.modes", "must be >= 1"))
            }
            InitialState::Stationary { states } if states.is_empty() => out.push(Diagnostic::new(
                "initial.states",
                "needs at least one state index",
            )),
            InitialState::Snapshot { path } if !self.resolve(path).is_file() => {
                out.push(Diagnostic::new(
                    "initial.path",
                    format!("file not found: {}", self.resolve(path).display()),
                ))
            }
            _ => {}
        }
        if matches!(
            init,
            InitialState::Oscillator { .. } | InitialState::RandomSmooth { .. }
        ) {
            if let Some(g) = &self.grid {
                if g.dim != 1 {
                    out.push(Diagnostic::new(
                        "initial.kind",
                        "oscillator-mode states are defined on 1D grids",
                    ));
                }
            }
        }
    }
}

fn diagnose_time(t: &TimeConfig, out: &mut Vec<Diagnostic>) {
    if !(t.dt > 0.0 && t.dt.is_finite()) {
        out.push(Diagnostic::new("time.dt", format!("{} must be > 0", t.dt)));
    }
    if !(t.t_end > 0.0 && t.t_end.is_finite()) {
        out.push(Diagnostic::new(
            "time.t_end",
            format!("{} must be > 0", t.t_end),
        ));
    }
    let times = t.checkpoint_times();
    if times.is_empty() {
        out.push(Diagnostic::new(
            "time.checkpoints",
            "at least one checkpoint is needed",
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        out.push(Diagnostic::new(
            "time.checkpoints",
            "must be strictly increasing",
        ));
    }
    if times
        .iter()
        .any(|c| !(*c > 0.0 && *c <= t.t_end * (1.0 + 1e-12)))
    {
        out.push(Diagnostic::new(
            "time.checkpoints",
            format!("must lie in (0, {}]", t.t_end),
        ));
    }
}

struct Needs {
    lattice: bool,
    grid: bool,
    initial: bool,
    time: bool,
    classical: bool,
    em: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENVELOPE: &str = "kind = \"envelope\"\nlattice = { segments = [[2.0, 0.5], [0.0, 1.0], [-2.0, 0.5], [0.0, 1.0]] }\n[tolerances]\nperiodicity = 1e-8\n";

    #[test]
    fn valid_config_has_no_diagnostics() {
        let c = ScenarioConfig::from_toml_str(ENVELOPE, ".").unwrap();
        assert_eq!(c.validate(), vec![]);
        assert_eq!(c.lattice().unwrap().segments().len(), 4);
    }

    #[test]
    fn missing_lattice_file_names_path() {
        let c = ScenarioConfig::from_toml_str(
            "kind = \"envelope\"\nlattice = \"nowhere.lat\"\n",
            "/tmp/none",
        )
        .unwrap();
        let d = c.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("/tmp/none/nowhere.lat"), "{}", d[0]);
    }

    #[test]
    fn bad_axis_names_the_axis() {
        let text = "kind = \"spectrum\"\n[grid]\ndim = 2\nn = [64, 100]\nl_half = 5.0\n";
        let d = ScenarioConfig::from_toml_str(text, ".").unwrap().validate();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].field, "grid.n");
        assert!(d[0].message.contains("axis 1"));
    }

    #[test]
    fn unrelated_tolerance_is_flagged() {
        let text = format!("{ENVELOPE}fidelity_defect = 1e-4\n");
        let d = ScenarioConfig::from_toml_str(&text, ".")
            .unwrap()
            .validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "tolerances.fidelity_defect");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(
            ScenarioConfig::from_toml_str("kind = \"envelope\"\nlatice = \"x\"\n", ".").is_err()
        );
    }

    #[test]
    fn round_trips_through_toml() {
        let text = "kind = \"verify-equivalence\"\nlattice = { segments = [[1.0, 3.0]] }\n\
                    [grid]\nn = 256\nl_half = 10.0\n[initial]\nkind = \"oscillator\"\nmodes = [[0, 1, 0], [1, 1, 0]]\n\
                    [time]\nt_end = 1.0\ndt = 1e-3\n[potential]\nkind = \"inverse-square\"\nstrength = 1.0\neps = 0.1\n";
        let c = ScenarioConfig::from_toml_str(text, ".").unwrap();
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        let again = ScenarioConfig::from_toml_str(&c.to_toml().unwrap(), ".").unwrap();
        assert!(again.validate().is_empty());
        assert_eq!(again.time.unwrap().checkpoint_times().len(), 5);
    }
}
