//! Classical tracking through `H = (px² + py²)/2 + K(s)(x² + y²)/2 + V(x, y, s)`,
//! normalized coordinates and the invariants that go with them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{EnvelopeFrame, LatticeSpec, MatchedEnvelope};
use crate::potential::ScalarPotential;

/// Transverse phase-space point at longitudinal position `s` (or at phase
/// `μ` once normalized).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub px: f64,
    pub y: f64,
    pub py: f64,
    pub s: f64,
}

impl PhaseState {
    pub fn new(x: f64, px: f64, y: f64, py: f64, s: f64) -> Self {
        Self { x, px, y, py, s }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.px, self.y, self.py, self.s]
            .iter()
            .all(|v| v.is_finite())
    }

    fn with_planes(&self, f: impl Fn(f64, f64) -> (f64, f64), s: f64) -> Self {
        let (x, px) = f(self.x, self.px);
        let (y, py) = f(self.y, self.py);
        Self { x, px, y, py, s }
    }
}

/// Extra potential `V(x, y, s)` on top of the focusing term.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PotentialSpec {
    #[default]
    None,
    /// `V(x, y, s) = U(x, y)`, independent of the envelope.
    Fixed { shape: ScalarPotential },
    /// `V(x, y, s) = W(x/√β, y/√β) / β(s)` with `β` the matched envelope:
    /// the normalized Hamiltonian is then `p²/2 + r²/2 + W(r)` with no
    /// dependence on the phase.
    MuIndependent { shape: ScalarPotential },
}

/// Lab → normalized: `z_N = z/√β`, `p_N = p√β − β′z/(2√β)` per plane, with
/// `s` replaced by the phase `μ`.
pub fn to_normalized(state: &PhaseState, frame: &EnvelopeFrame) -> PhaseState {
    let sb = frame.beta.sqrt();
    let db = frame.dbeta;
    state.with_planes(|z, p| (z / sb, p * sb - db * z / (2.0 * sb)), frame.mu)
}

/// Inverse of [`to_normalized`]; the result carries `frame.s`.
pub fn from_normalized(state: &PhaseState, frame: &EnvelopeFrame) -> PhaseState {
    let sb = frame.beta.sqrt();
    let db = frame.dbeta;
    state.with_planes(
        |zn, pn| {
            let z = zn * sb;
            (z, (pn + db * z / (2.0 * sb)) / sb)
        },
        frame.s,
    )
}

/// Courant–Snyder invariants `(p_N² + z_N²)/2` of each plane.
pub fn courant_snyder(state_normalized: &PhaseState) -> (f64, f64) {
    let s = state_normalized;
    (
        0.5 * (s.px * s.px + s.x * s.x),
        0.5 * (s.py * s.py + s.y * s.y),
    )
}

/// `(p_xN² + p_yN²)/2 + (x_N² + y_N²)/2 + W(x_N, y_N)`.
///
/// Defined for `None` and the μ-independent family; a fixed potential has no
/// phase-independent normalized image and is rejected.
pub fn normalized_hamiltonian(
    state_normalized: &PhaseState,
    potential: &PotentialSpec,
) -> Result<f64> {
    let s = state_normalized;
    let base = 0.5 * (s.px * s.px + s.py * s.py + s.x * s.x + s.y * s.y);
    match potential {
        PotentialSpec::None => Ok(base),
        PotentialSpec::MuIndependent { shape } => Ok(base + shape.value([s.x, s.y], s.s)),
        PotentialSpec::Fixed { .. } => Err(invalid(
            "normalized Hamiltonian needs the mu-independent potential family",
        )),
    }
}

/// Which states [`track_with`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Record {
    /// Every integration step.
    Steps,
    /// Every segment boundary.
    #[default]
    Segments,
    /// Once per lattice period.
    Periods,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    /// Set when tracking stopped early on a non-finite value.
    pub diagnostic: Option<String>,
}

/// Kick–drift–kick integrator for a fixed lattice and potential.
#[derive(Debug, Clone)]
pub struct Tracker {
    lattice: LatticeSpec,
    potential: PotentialSpec,
    envelope: Option<MatchedEnvelope>,
}

impl Tracker {
    pub fn new(lattice: &LatticeSpec, potential: PotentialSpec) -> Result<Self> {
        let envelope = match potential {
            PotentialSpec::MuIndependent { .. } => Some(MatchedEnvelope::new(lattice)?),
            _ => None,
        };
        Ok(Self {
            lattice: lattice.clone(),
            potential,
            envelope,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    /// `∂V/∂(x, y)` at `s`.
    pub fn force_gradient(&self, x: f64, y: f64, s: f64) -> Result<[f64; 2]> {
        let g = match (&self.potential, &self.envelope) {
            (PotentialSpec::None, _) => [0.0, 0.0],
            (PotentialSpec::Fixed { shape }, _) => shape.gradient([x, y], s),
            (PotentialSpec::MuIndependent { shape }, Some(env)) => {
                let (beta, _) = env.beta_at(s)?;
                let sb = beta.sqrt();
                let g = shape.gradient([x / sb, y / sb], s);
                let c = 1.0 / (beta * sb);
                [c * g[0], c * g[1]]
            }
            (PotentialSpec::MuIndependent { .. }, None) => unreachable!("envelope built in new"),
        };
        Ok(g)
    }

    fn kick(&self, st: &mut PhaseState, k: f64, h: f64) -> Result<()> {
        let g = self.force_gradient(st.x, st.y, st.s)?;
        st.px -= h * (k * st.x + g[0]);
        st.py -= h * (k * st.y + g[1]);
        Ok(())
    }

    /// One step of length `h` with focusing `k` held fixed: half kick at
    /// `s`, drift, half kick at `s + h`.
    pub fn step(&self, state: &PhaseState, k: f64, h: f64) -> Result<PhaseState> {
        let mut st = *state;
        self.kick(&mut st, k, 0.5 * h)?;
        st.x += h * st.px;
        st.y += h * st.py;
        st.s += h;
        self.kick(&mut st, k, 0.5 * h)?;
        if !st.is_finite() {
            return Err(invalid(format!("non-finite phase state at s = {}", st.s)));
        }
        Ok(st)
    }
}

/// Tracks `n_periods` lattice periods from `state.s`, recording at segment
/// boundaries.
pub fn track(
    state: &PhaseState,
    lattice: &LatticeSpec,
    potential: &PotentialSpec,
    n_periods: usize,
    steps_per_segment: usize,
) -> Result<Trajectory> {
    let tracker = Tracker::new(lattice, potential.clone())?;
    track_with(
        &tracker,
        state,
        n_periods as f64 * lattice.period(),
        steps_per_segment,
        Record::Segments,
    )
}

/// Tracks over a length `distance`. Steps never straddle a segment boundary;
/// a piece of length `l` inside a segment of length `L` gets
/// `ceil(steps_per_segment · l / L)` steps.
pub fn track_with(
    tracker: &Tracker,
    state: &PhaseState,
    distance: f64,
    steps_per_segment: usize,
    record: Record,
) -> Result<Trajectory> {
    if steps_per_segment == 0 {
        return Err(invalid("steps_per_segment must be >= 1"));
    }
    if !state.is_finite() {
        return Err(invalid("initial phase state is not finite"));
    }
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(invalid(format!(
            "tracking distance {distance} must be finite and >= 0"
        )));
    }
    let lattice = &tracker.lattice;
    let s0 = state.s;
    let s1 = s0 + distance;
    let mut stops = lattice.boundaries_between(s0, s1);
    stops.push(s1);
    let period = lattice.period();
    let mut states = vec![*state];
    let mut current = *state;
    let mut start = s0;
    let mut next_period = s0 + period;
    for stop in stops {
        if stop <= start {
            continue;
        }
        let (_, idx, _) = lattice.locate(0.5 * (start + stop));
        let seg = lattice.segments()[idx];
        let piece = stop - start;
        let n = ((steps_per_segment as f64 * piece / seg.length).ceil() as usize).max(1);
        let h = piece / n as f64;
        for i in 0..n {
            match tracker.step(&current, seg.k, h) {
                Ok(mut next) => {
                    if i + 1 == n {
                        next.s = stop;
                    }
                    current = next;
                }
                Err(e) => {
                    return Ok(Trajectory {
                        states,
                        diagnostic: Some(format!("tracking stopped at s = {}: {e}", current.s)),
                    });
                }
            }
            if record == Record::Steps {
                states.push(current);
            }
        }
        match record {
            Record::Segments => states.push(current),
            Record::Periods => {
                let at_period = (stop - next_period).abs() <= 1e-9 * (1.0 + stop.abs());
                if at_period {
                    next_period += period;
                }
                if at_period || stop == s1 {
                    states.push(current);
                }
            }
            Record::Steps => {}
        }
        start = stop;
    }
    Ok(Trajectory {
        states,
        diagnostic: None,
    })
}

/// Writes `s,x,px,y,py,Ix,Iy,HN`. The invariant columns use the matched
/// envelope when one is given and are left empty otherwise; `HN` is empty for
/// fixed potentials.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    states: &[PhaseState],
    envelope: Option<&MatchedEnvelope>,
    potential: &PotentialSpec,
) -> Result<()> {
    writeln!(w, "s,x,px,y,py,Ix,Iy,HN")?;
    for st in states {
        write!(w, "{},{},{},{},{},", st.s, st.x, st.px, st.y, st.py)?;
        match envelope {
            Some(env) => {
                let n = to_normalized(st, &env.at(st.s)?);
                let (ix, iy) = courant_snyder(&n);
                let hn = normalized_hamiltonian(&n, potential)
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                writeln!(w, "{ix},{iy},{hn}")?;
            }
            None => writeln!(w, ",,")?,
        }
    }
    Ok(())
}
