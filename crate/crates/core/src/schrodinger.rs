//! Split-operator propagation of the scaled Schrödinger equation
//!
//! ```text
//! i√2 ∂ψ/∂t = -∇²ψ + (K(t) r²/2 + U(r, t)) ψ          (lab frame)
//! i√2 ∂ψ/∂τ = -∇²ψ + (r²/2 + β U(r√β, t(τ))) ψ        (normalized frame)
//! ```
//!
//! and finite-difference solution of the stationary normalized problem.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::sync::Arc;

use crate::eigen;
use crate::error::{invalid, Error, Result};
use crate::fields::{GridSpec, Spectral, WaveField, C64};
use crate::lattice::{EnvelopeTrack, LatticeSpec};
use crate::potential::ScalarPotential;

/// Unit conventions of the scaled equations: an effective Planck constant of
/// `√2` and a kinetic operator `-∇²` with unit coefficient (mass 1 with
/// `p = -i√2 ∇`).
pub struct ScaledUnits;

impl ScaledUnits {
    pub const HBAR: f64 = SQRT_2;
    pub const KINETIC_COEF: f64 = 1.0;
}

/// Lab-frame potential `K(t) r²/2 + U(r, t)` with `K` read from a lattice
/// (longitudinal position playing the role of time).
#[derive(Debug, Clone)]
pub struct LabPotential {
    pub lattice: LatticeSpec,
    pub u: ScalarPotential,
}

impl LabPotential {
    pub fn new(lattice: LatticeSpec, u: ScalarPotential) -> Self {
        Self { lattice, u }
    }

    pub fn value(&self, r: [f64; 2], t: f64) -> f64 {
        0.5 * self.lattice.focusing_at(t) * (r[0] * r[0] + r[1] * r[1]) + self.u.value(r, t)
    }
}

/// Normalized-frame potential `V_N(r_N, τ)`.
#[derive(Debug, Clone)]
pub enum NormalizedPotential {
    /// `r²/2 + W(r)` with `W` given directly in normalized coordinates.
    Static(ScalarPotential),
    /// `r²/2 + β(τ) U(r √β(τ), t(τ))` for a lab potential `U` and the
    /// envelope that defines `β` and `τ(t)`.
    Transformed {
        lab: ScalarPotential,
        envelope: Arc<EnvelopeTrack>,
    },
}

impl NormalizedPotential {
    /// The bare oscillator `r²/2`.
    pub fn oscillator() -> Self {
        Self::Static(ScalarPotential::Zero)
    }

    /// True when `V_N` does not depend on `τ`.
    pub fn is_time_homogeneous(&self) -> bool {
        match self {
            Self::Static(w) => w.is_static(),
            Self::Transformed { lab, .. } => lab.is_scale_invariant(),
        }
    }

    /// `(β, t)` at normalized time `τ`.
    pub fn frame_at(&self, tau: f64) -> Result<(f64, f64)> {
        match self {
            Self::Static(_) => Ok((1.0, tau)),
            Self::Transformed { envelope, .. } => {
                let t = envelope.s_at_phase(tau)?;
                Ok((envelope.beta_at(t)?.0, t))
            }
        }
    }

    fn inner(&self) -> &ScalarPotential {
        match self {
            Self::Static(w) => w,
            Self::Transformed { lab, .. } => lab,
        }
    }

    /// `V_N(r, τ)` given the `(β, t)` pair returned by [`Self::frame_at`].
    pub fn value_in_frame(&self, r: [f64; 2], beta: f64, t: f64) -> f64 {
        let u = self.inner();
        let r2 = r[0] * r[0] + r[1] * r[1];
        if u.is_zero() {
            return 0.5 * r2;
        }
        let sb = beta.sqrt();
        0.5 * r2 + beta * u.value([r[0] * sb, r[1] * sb], t)
    }

    pub fn value(&self, r: [f64; 2], tau: f64) -> Result<f64> {
        let (beta, t) = self.frame_at(tau)?;
        Ok(self.value_in_frame(r, beta, t))
    }
}

/// Checks every sampled potential value and converts it into the
/// half-step phase factor `exp(-i V h / (2√2))`.
pub(crate) fn potential_half_phase<F>(grid: &GridSpec, h: f64, time: f64, v: F) -> Result<Vec<C64>>
where
    F: Fn([f64; 2]) -> f64,
{
    let c = -0.5 * h / SQRT_2;
    grid.nodes()
        .enumerate()
        .map(|(node, r)| {
            let val = v(r);
            if !val.is_finite() {
                return Err(Error::NonFinitePotential {
                    node,
                    coords: r,
                    time,
                });
            }
            Ok(C64::from_polar(1.0, c * val))
        })
        .collect()
}

/// FFT plans plus a cached kinetic phase `exp(-i k² h / √2)`.
#[derive(Debug, Clone)]
pub(crate) struct KineticStep {
    pub spectral: Spectral,
    k2: Vec<f64>,
    cached: Option<(f64, Vec<C64>)>,
}

impl KineticStep {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            spectral: Spectral::new(grid),
            k2: grid.k_squared(),
            cached: None,
        }
    }

    /// Applies the full kinetic propagator over a step `h`.
    pub fn apply(&mut self, values: &mut [C64], h: f64) {
        if self.cached.as_ref().map(|(ch, _)| *ch != h).unwrap_or(true) {
            let c = -h / SQRT_2;
            let phase = self
                .k2
                .iter()
                .map(|k2| C64::from_polar(1.0, c * k2))
                .collect();
            self.cached = Some((h, phase));
        }
        let phase = &self.cached.as_ref().unwrap().1;
        self.spectral.forward(values);
        values.iter_mut().zip(phase).for_each(|(v, p)| *v *= p);
        self.spectral.inverse(values);
    }
}

fn mul_in_place(values: &mut [C64], phase: &[C64]) {
    values.iter_mut().zip(phase).for_each(|(v, p)| *v *= p);
}

/// Splits `[t0, t1]` into uniform steps no longer than `dt`, restarting the
/// step grid at every breakpoint. Returns `(start, step, count)` pieces.
pub(crate) fn step_plan(t0: f64, t1: f64, dt: f64, breakpoints: &[f64]) -> Vec<(f64, f64, usize)> {
    let mut edges = vec![t0];
    edges.extend(breakpoints.iter().copied().filter(|b| *b > t0 && *b < t1));
    edges.push(t1);
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let len = w[1] - w[0];
            let n = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
            (w[0], len / n as f64, n)
        })
        .collect()
}

fn check_step(t0: f64, t_end: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time step must be > 0, got {dt}")));
    }
    if !(t_end >= t0) {
        return Err(invalid(format!(
            "end time {t_end} precedes field time {t0}"
        )));
    }
    Ok(())
}

/// Lab-frame Strang propagator. Reuse one instance to keep FFT plans and
/// phase tables across calls.
#[derive(Debug, Clone)]
pub struct LabPropagator {
    kinetic: KineticStep,
    potential: LabPotential,
    grid: GridSpec,
}

impl LabPropagator {
    pub fn new(grid: &GridSpec, potential: LabPotential) -> Self {
        Self {
            kinetic: KineticStep::new(grid),
            potential,
            grid: grid.clone(),
        }
    }

    pub fn potential(&self) -> &LabPotential {
        &self.potential
    }

    /// Advances `field` from `field.time` to `t_end` with steps of at most
    /// `dt`; the step grid restarts at every focusing discontinuity.
    pub fn advance(&mut self, field: &mut WaveField, t_end: f64, dt: f64) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::GridMismatch(
                "field grid differs from propagator grid".into(),
            ));
        }
        check_step(field.time, t_end, dt)?;
        let breaks = self.potential.lattice.boundaries_between(field.time, t_end);
        let static_u = self.potential.u.is_static();
        for (start, h, n) in step_plan(field.time, t_end, dt, &breaks) {
            let mut phase: Option<Vec<C64>> = None;
            for j in 0..n {
                let t_mid = start + (j as f64 + 0.5) * h;
                if phase.is_none() || !static_u {
                    let pot = &self.potential;
                    phase = Some(potential_half_phase(&self.grid, h, t_mid, |r| {
                        pot.value(r, t_mid)
                    })?);
                }
                let p = phase.as_ref().unwrap();
                mul_in_place(&mut field.values, p);
                self.kinetic.apply(&mut field.values, h);
                mul_in_place(&mut field.values, p);
            }
            field.time = start + n as f64 * h;
        }
        field.time = t_end;
        Ok(())
    }
}

/// Normalized-frame Strang propagator; `field.time` is the normalized time τ.
#[derive(Debug, Clone)]
pub struct NormalizedPropagator {
    kinetic: KineticStep,
    potential: NormalizedPotential,
    grid: GridSpec,
    homogeneous_phase: Option<(f64, Vec<C64>)>,
}

impl NormalizedPropagator {
    pub fn new(grid: &GridSpec, potential: NormalizedPotential) -> Self {
        Self {
            kinetic: KineticStep::new(grid),
            potential,
            grid: grid.clone(),
            homogeneous_phase: None,
        }
    }

    pub fn advance(&mut self, field: &mut WaveField, tau_end: f64, dtau: f64) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::GridMismatch(
                "field grid differs from propagator grid".into(),
            ));
        }
        check_step(field.time, tau_end, dtau)?;
        let homogeneous = self.potential.is_time_homogeneous();
        for (start, h, n) in step_plan(field.time, tau_end, dtau, &[]) {
            for j in 0..n {
                let tau_mid = start + (j as f64 + 0.5) * h;
                let phase = if homogeneous {
                    let stale = self
                        .homogeneous_phase
                        .as_ref()
                        .map(|(ch, _)| *ch != h)
                        .unwrap_or(true);
                    if stale {
                        // A homogeneous V_N is the same in every frame; use β = 1.
                        let pot = &self.potential;
                        let p = potential_half_phase(&self.grid, h, tau_mid, |r| {
                            pot.value_in_frame(r, 1.0, 0.0)
                        })?;
                        self.homogeneous_phase = Some((h, p));
                    }
                    None
                } else {
                    let (beta, t) = self.potential.frame_at(tau_mid)?;
                    let pot = &self.potential;
                    Some(potential_half_phase(&self.grid, h, tau_mid, |r| {
                        pot.value_in_frame(r, beta, t)
                    })?)
                };
                let p: &[C64] = match &phase {
                    Some(p) => p,
                    None => &self.homogeneous_phase.as_ref().unwrap().1,
                };
                mul_in_place(&mut field.values, p);
                self.kinetic.apply(&mut field.values, h);
                mul_in_place(&mut field.values, p);
            }
        }
        field.time = tau_end;
        Ok(())
    }
}

/// Propagates a lab-frame field to `t_end`.
pub fn evolve_lab(field: &WaveField, pot: &LabPotential, t_end: f64, dt: f64) -> Result<WaveField> {
    let mut out = field.clone();
    LabPropagator::new(&field.grid, pot.clone()).advance(&mut out, t_end, dt)?;
    Ok(out)
}

/// Propagates a normalized-frame field to `tau_end`.
pub fn evolve_normalized(
    field: &WaveField,
    v_n: &NormalizedPotential,
    tau_end: f64,
    dtau: f64,
) -> Result<WaveField> {
    let mut out = field.clone();
    NormalizedPropagator::new(&field.grid, v_n.clone()).advance(&mut out, tau_end, dtau)?;
    Ok(out)
}

/// Node count above which 2D stationary solves are refused.
pub const MAX_STATIONARY_NODES_2D: usize = 1 << 15;

/// Lowest `n_states` eigenpairs of `-∇² + V` discretized with second-order
/// central differences (zero Dirichlet data beyond the grid). Energies are
/// ascending and the returned fields have unit `norm2`.
pub fn solve_stationary<V>(v: V, grid: &GridSpec, n_states: usize) -> Result<Vec<(f64, WaveField)>>
where
    V: Fn([f64; 2]) -> f64,
{
    if n_states == 0 {
        return Ok(Vec::new());
    }
    let potential: Vec<f64> = grid.nodes().map(&v).collect();
    if let Some(node) = potential.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinitePotential {
            node,
            coords: grid.node(node),
            time: 0.0,
        });
    }
    let pairs = match grid.axes() {
        [a] => {
            let inv = 1.0 / (a.spacing() * a.spacing());
            let diag: Vec<f64> = potential.iter().map(|p| 2.0 * inv + p).collect();
            let off = vec![-inv; a.n - 1];
            eigen::tridiagonal_lowest(&diag, &off, n_states)?
        }
        [a, b] => {
            if grid.len() > MAX_STATIONARY_NODES_2D {
                return Err(invalid(format!(
                    "2D stationary solve limited to {MAX_STATIONARY_NODES_2D} nodes, grid has {}",
                    grid.len()
                )));
            }
            let (ia, ib) = (
                1.0 / (a.spacing() * a.spacing()),
                1.0 / (b.spacing() * b.spacing()),
            );
            let (na, nb) = (a.n, b.n);
            let apply = |x: &[f64], y: &mut [f64]| {
                for i in 0..na {
                    for j in 0..nb {
                        let idx = i * nb + j;
                        let mut acc = (2.0 * ia + 2.0 * ib + potential[idx]) * x[idx];
                        if i > 0 {
                            acc -= ia * x[idx - nb];
                        }
                        if i + 1 < na {
                            acc -= ia * x[idx + nb];
                        }
                        if j > 0 {
                            acc -= ib * x[idx - 1];
                        }
                        if j + 1 < nb {
                            acc -= ib * x[idx + 1];
                        }
                        y[idx] = acc;
                    }
                }
            };
            eigen::lanczos_lowest(grid.len(), n_states, 1e-11, 3000, apply)?
        }
        _ => unreachable!(),
    };
    let scale = 1.0 / grid.cell_volume().sqrt();
    Ok(pairs
        .into_iter()
        .map(|(e, mut vec)| {
            let pivot = vec
                .iter()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            vec.iter_mut().for_each(|x| *x *= sign * scale);
            let values = vec.into_iter().map(|x| C64::new(x, 0.0)).collect();
            (
                e,
                WaveField::new(grid.clone(), values, 0.0).expect("finite eigenvector"),
            )
        })
        .collect())
}

/// Richardson extrapolation of a second-order quantity computed at spacing
/// `h` (`coarse`) and `h/2` (`fine`).
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// One row of the observables table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Observables {
    pub t: f64,
    pub norm2: f64,
    pub ex: f64,
    pub er2: f64,
}

impl Observables {
    pub fn of(field: &WaveField) -> Self {
        Self {
            t: field.time,
            norm2: field.norm2(),
            ex: field.expect_x(),
            er2: field.expect_r2(),
        }
    }
}

/// CSV with header `t,norm2,ex,er2`.
pub fn write_observables_csv<W: Write>(mut w: W, rows: &[Observables]) -> std::io::Result<()> {
    writeln!(w, "t,norm2,ex,er2")?;
    for o in rows {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            o.t, o.norm2, o.ex, o.er2
        )?;
    }
    Ok(())
}
