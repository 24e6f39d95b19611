//! The map between the lab frame and the normalized frame.
//!
//! With an envelope `β(t)` solving `(√β)'' + K √β = β^(-3/2)`:
//!
//! ```text
//! dτ = dt / β,   r_N = r / √β,   ψ = f exp(i g r_N²) ψ_N,
//! g = β' / (4√2),   f = β^(-n/4)   (n = spatial dimension)
//! ```
//!
//! `f` carries the dimension so the map preserves the L² norm; for `n = 1` it
//! is `β^(-1/4)`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fields::{resample, resample_spinor, GridSpec, Resampled, SpinorField, WaveField, C64};
use crate::lattice::{EnvelopeFrame, EnvelopeTrack, LatticeSpec};
use crate::potential::ScalarPotential;
use crate::schrodinger::NormalizedPotential;

/// Envelope data needed to transform fields at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformFrame {
    pub t: f64,
    pub beta: f64,
    pub dbeta: f64,
    pub tau: f64,
}

impl TransformFrame {
    pub fn from_envelope(e: &EnvelopeFrame) -> Self {
        Self {
            t: e.s,
            beta: e.beta,
            dbeta: e.dbeta,
            tau: e.tau,
        }
    }

    /// The trivial frame `β = 1, β' = 0` at time `t` (with `τ = t`).
    pub fn identity(t: f64) -> Self {
        Self {
            t,
            beta: 1.0,
            dbeta: 0.0,
            tau: t,
        }
    }

    /// Quadratic phase coefficient `g = β'/(4√2)`.
    pub fn g(&self) -> f64 {
        self.dbeta / (4.0 * SQRT_2)
    }

    /// Amplitude factor `f = β^(-dim/4)`.
    pub fn f(&self, dim: usize) -> f64 {
        self.beta.powf(-(dim as f64) / 4.0)
    }
}

/// Transform frame at time `t`, with `β, β'` from the envelope started at
/// `envelope0` and `τ` accumulated from `envelope0.tau`.
pub fn frame_at(
    lattice: &LatticeSpec,
    envelope0: &EnvelopeFrame,
    t: f64,
) -> Result<TransformFrame> {
    let track = EnvelopeTrack::new(lattice, *envelope0, t)?;
    Ok(TransformFrame::from_envelope(track.end()))
}

/// Frames for many times from one precomputed envelope.
#[derive(Debug, Clone)]
pub struct FrameSchedule {
    track: Arc<EnvelopeTrack>,
}

impl FrameSchedule {
    pub fn new(lattice: &LatticeSpec, envelope0: EnvelopeFrame, t_max: f64) -> Result<Self> {
        Ok(Self {
            track: Arc::new(EnvelopeTrack::new(lattice, envelope0, t_max)?),
        })
    }

    pub fn track(&self) -> &Arc<EnvelopeTrack> {
        &self.track
    }

    pub fn at(&self, t: f64) -> Result<TransformFrame> {
        Ok(TransformFrame::from_envelope(&self.track.at(t)?))
    }

    /// Lab time at normalized time `tau`.
    pub fn t_at(&self, tau: f64) -> Result<f64> {
        self.track.s_at_phase(tau)
    }
}

/// Sign of the quadratic phase in `ψ = f exp(±i g r_N²) ψ_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseSign {
    /// `exp(+i g r_N²)`, the convention of the transform as stated.
    #[default]
    Plus,
    /// `exp(-i g r_N²)`; only for checking which sign the dynamics select.
    Minus,
}

impl PhaseSign {
    fn factor(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

fn check_time(actual: f64, expected: f64, what: &str) -> Result<()> {
    if (actual - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
        return Err(invalid(format!(
            "field {what} {actual} does not match frame {what} {expected}"
        )));
    }
    Ok(())
}

fn check_frame(frame: &TransformFrame) -> Result<()> {
    if !(frame.beta > 0.0 && frame.beta.is_finite() && frame.dbeta.is_finite()) {
        return Err(invalid(format!(
            "transform frame needs finite beta > 0, got beta = {}, beta' = {}",
            frame.beta, frame.dbeta
        )));
    }
    Ok(())
}

// Multiplies normalized-grid values by `amp · exp(i sign g r_N²)`.
fn apply_gauge(values: &mut [C64], grid: &GridSpec, amp: f64, phase_coef: f64) {
    values.iter_mut().zip(grid.nodes()).for_each(|(v, r)| {
        let r2 = r[0] * r[0] + r[1] * r[1];
        *v *= C64::from_polar(amp, phase_coef * r2);
    });
}

/// Lab field at time `t` → normalized field at `τ(t)` on `target`.
///
/// `ψ_N(r_N) = f⁻¹ exp(-i g r_N²) ψ(r_N √β)`, evaluated by band-limited
/// resampling of `ψ` onto `target` scaled by `√β`.
pub fn ermakov_forward(
    field: &WaveField,
    frame: &TransformFrame,
    target: &GridSpec,
) -> Result<Resampled<WaveField>> {
    ermakov_forward_signed(field, frame, target, PhaseSign::Plus)
}

pub fn ermakov_forward_signed(
    field: &WaveField,
    frame: &TransformFrame,
    target: &GridSpec,
    sign: PhaseSign,
) -> Result<Resampled<WaveField>> {
    check_frame(frame)?;
    check_time(field.time, frame.t, "time")?;
    let lab_nodes = target.scaled(frame.beta.sqrt())?;
    let Resampled {
        field: mut out,
        warning,
    } = resample(field, &lab_nodes)?;
    out.grid = target.clone();
    let dim = target.dim();
    apply_gauge(
        &mut out.values,
        target,
        1.0 / frame.f(dim),
        -sign.factor() * frame.g(),
    );
    out.time = frame.tau;
    Ok(Resampled {
        field: out,
        warning,
    })
}

/// Normalized field at `τ` → lab field at `t(τ)` on `target`;
/// `ψ(r) = f exp(i g (r/√β)²) ψ_N(r/√β)`.
pub fn ermakov_inverse(
    field_n: &WaveField,
    frame: &TransformFrame,
    target: &GridSpec,
) -> Result<Resampled<WaveField>> {
    ermakov_inverse_signed(field_n, frame, target, PhaseSign::Plus)
}

pub fn ermakov_inverse_signed(
    field_n: &WaveField,
    frame: &TransformFrame,
    target: &GridSpec,
    sign: PhaseSign,
) -> Result<Resampled<WaveField>> {
    check_frame(frame)?;
    check_time(field_n.time, frame.tau, "tau")?;
    let normalized_nodes = target.scaled(1.0 / frame.beta.sqrt())?;
    let Resampled {
        field: mut out,
        warning,
    } = resample(field_n, &normalized_nodes)?;
    let dim = target.dim();
    apply_gauge(
        &mut out.values,
        &normalized_nodes,
        frame.f(dim),
        sign.factor() * frame.g(),
    );
    out.grid = target.clone();
    out.time = frame.t;
    Ok(Resampled {
        field: out,
        warning,
    })
}

/// Componentwise forward map of a spinor.
pub fn ermakov_forward_spinor(
    field: &SpinorField,
    frame: &TransformFrame,
    target: &GridSpec,
) -> Result<Resampled<SpinorField>> {
    check_frame(frame)?;
    check_time(field.time, frame.t, "time")?;
    let lab_nodes = target.scaled(frame.beta.sqrt())?;
    let Resampled {
        field: mut out,
        warning,
    } = resample_spinor(field, &lab_nodes)?;
    out.grid = target.clone();
    let (amp, coef) = (1.0 / frame.f(target.dim()), -frame.g());
    apply_gauge(&mut out.up, target, amp, coef);
    apply_gauge(&mut out.down, target, amp, coef);
    out.time = frame.tau;
    Ok(Resampled {
        field: out,
        warning,
    })
}

pub fn ermakov_inverse_spinor(
    field_n: &SpinorField,
    frame: &TransformFrame,
    target: &GridSpec,
) -> Result<Resampled<SpinorField>> {
    check_frame(frame)?;
    check_time(field_n.time, frame.tau, "tau")?;
    let normalized_nodes = target.scaled(1.0 / frame.beta.sqrt())?;
    let Resampled {
        field: mut out,
        warning,
    } = resample_spinor(field_n, &normalized_nodes)?;
    let (amp, coef) = (frame.f(target.dim()), frame.g());
    apply_gauge(&mut out.up, &normalized_nodes, amp, coef);
    apply_gauge(&mut out.down, &normalized_nodes, amp, coef);
    out.grid = target.clone();
    out.time = frame.t;
    Ok(Resampled {
        field: out,
        warning,
    })
}

/// Normalized image `β U(r_N √β, t)` of a lab potential at one frame,
/// expressed as a descriptor in normalized coordinates. The full normalized
/// potential is `r_N²/2` plus this term.
///
/// `a/(r² + ε²)` maps to `a/(r_N² + ε²/β)`, so the unregularized `a/r²` is
/// reproduced exactly for every `β`.
pub fn transform_potential(u: &ScalarPotential, frame: &TransformFrame) -> ScalarPotential {
    let b = frame.beta;
    match u {
        ScalarPotential::Zero => ScalarPotential::Zero,
        ScalarPotential::InverseSquare { strength, eps } => ScalarPotential::InverseSquare {
            strength: *strength,
            eps: eps / b.sqrt(),
        },
        ScalarPotential::Quadratic { coef } => ScalarPotential::Quadratic { coef: coef * b * b },
        ScalarPotential::Quartic { coef } => ScalarPotential::Quartic {
            coef: coef * b * b * b,
        },
        ScalarPotential::Custom(_) => {
            let (inner, t, sb) = (u.clone(), frame.t, b.sqrt());
            ScalarPotential::custom(move |r, _| b * inner.value([r[0] * sb, r[1] * sb], t))
        }
    }
}

/// Time-dependent normalized potential `r_N²/2 + β(τ) U(r_N √β(τ), t(τ))`
/// along a frame schedule.
pub fn normalized_potential(u: &ScalarPotential, schedule: &FrameSchedule) -> NormalizedPotential {
    NormalizedPotential::Transformed {
        lab: u.clone(),
        envelope: schedule.track().clone(),
    }
}
