//! Closed-form and semi-analytic oracles: the drift envelope, oscillator
//! eigenstates under `−∇² + r²/2`, the polar `r²/2 + a/r²` family, and
//! population diagnostics for the Lewis–Riesenfeld invariant.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use serde::Serialize;

use crate::eigen::tridiagonal_lowest;
use crate::error::{invalid, Result};
use crate::fields::{GridSpec, WaveField, C64};
use crate::lattice::EnvelopeTrack;
use crate::transform::{ermakov_forward, TransformFrame};

/// `(β, β′) = (1 + t², 2t)`: the envelope of free motion with `β(0) = 1`,
/// `β′(0) = 0`.
pub fn drift_beta(t: f64) -> (f64, f64) {
    (1.0 + t * t, 2.0 * t)
}

/// Residual of the envelope equation in `β` form,
/// `β β″/2 − β′²/4 + K β² − 1`.
pub fn envelope_residual(beta: f64, dbeta: f64, ddbeta: f64, k: f64) -> f64 {
    0.5 * beta * ddbeta - 0.25 * dbeta * dbeta + k * beta * beta - 1.0
}

/// `(√β)″ + K √β − β^(−3/2)`, the envelope equation for `w = √β`.
pub fn ermakov_residual(w: f64, ddw: f64, k: f64) -> f64 {
    ddw + k * w - w.powi(-3)
}

/// Largest `|ermakov_residual|` at `n_per_segment` interior points of every
/// knot interval of a track. `(√β)″` is a fourth-order central difference
/// of sampled `β` values alone, so the check shares nothing with the
/// transport formulas beyond `β` itself.
pub fn track_residual(track: &EnvelopeTrack, n_per_segment: usize) -> Result<f64> {
    let n = n_per_segment.max(1);
    let lattice = track.lattice();
    let mut worst = 0.0f64;
    for pair in track.knots().windows(2) {
        let (a, b) = (pair[0].s, pair[1].s);
        let width = b - a;
        if width <= 0.0 {
            continue;
        }
        let h = 1e-3f64.min(0.1 * width / n as f64);
        let k = lattice.focusing_at(a + 0.5 * width);
        let w = |x: f64| track.beta_at(x).map(|v| v.0.sqrt());
        for j in 0..n {
            let s = a + width * (j as f64 + 0.5) / n as f64;
            let w0 = w(s)?;
            let ddw =
                (16.0 * (w(s + h)? + w(s - h)?) - (w(s + 2.0 * h)? + w(s - 2.0 * h)?) - 30.0 * w0)
                    / (12.0 * h * h);
            worst = worst.max(ermakov_residual(w0, ddw, k).abs());
        }
    }
    Ok(worst)
}

/// `E_n = (n + 1/2) √2`.
pub fn oscillator_energy(n: usize) -> f64 {
    (n as f64 + 0.5) * SQRT_2
}

/// Oscillator length: eigenfunctions are Hermite functions of `x / x0`.
pub const OSCILLATOR_LENGTH: f64 = 1.189_207_115_002_721; // 2^(1/4)

/// Values of the first `count` normalized eigenfunctions of
/// `−ψ″ + x²/2 ψ = E ψ` at `x`.
pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let x0 = OSCILLATOR_LENGTH;
    let xi = x / x0;
    let scale = 1.0 / x0.sqrt();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    out.push(cur * scale);
    for n in 0..count.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * xi * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        out.push(cur * scale);
    }
    out
}

/// Energy and sampled eigenfunction `n` of the 1D normalized oscillator.
pub fn oscillator_eigens(n: usize, grid: &GridSpec) -> Result<(f64, WaveField)> {
    if grid.dim() != 1 {
        return Err(invalid(
            "oscillator eigenfunctions are provided on 1D grids",
        ));
    }
    let field = WaveField::from_fn(grid.clone(), 0.0, |r| {
        C64::new(hermite_functions(n + 1, r[0])[n], 0.0)
    });
    Ok((oscillator_energy(n), field))
}

/// `max |−ψ_n″ + x²/2 ψ_n − E_n ψ_n|` over `xs`, with `ψ_n″` obtained from
/// the ladder relations `ψ_n′ = (√n ψ_{n−1} − √(n+1) ψ_{n+1}) / (√2 x0)`.
pub fn oscillator_residual(n: usize, xs: &[f64]) -> f64 {
    let x0 = OSCILLATOR_LENGTH;
    let c = 1.0 / (SQRT_2 * x0);
    let mut worst = 0.0f64;
    for &x in xs {
        let h = hermite_functions(n + 3, x);
        let at = |k: isize| if k < 0 { 0.0 } else { h[k as usize] };
        let d1 = |k: isize| {
            let kf = k as f64;
            c * (kf.sqrt() * at(k - 1) - (kf + 1.0).sqrt() * at(k + 1))
        };
        let nn = n as isize;
        let nf = n as f64;
        let d2 = c
            * (nf.sqrt() * if nn >= 1 { d1(nn - 1) } else { 0.0 } - (nf + 1.0).sqrt() * d1(nn + 1));
        let r = -d2 + 0.5 * x * x * h[n] - oscillator_energy(n) * h[n];
        worst = worst.max(r.abs());
    }
    worst
}

/// Radial resolution used by [`radial_separable_energies`].
pub const RADIAL_NODES: usize = 4000;
pub const RADIAL_EXTENT: f64 = 12.0;

/// Energy of `−∇² + r²/2 + a/r²` in the plane for radial index `n_r` and
/// angular number `m`, from a finite-volume discretization of
/// `u = √r R` on `(0, r_max)` at `n` cells.
pub fn radial_energy(a: f64, n_r: usize, m: i32, n: usize, r_max: f64) -> Result<f64> {
    let m2 = (m as f64) * (m as f64);
    if !(m2 + a >= 0.0) {
        return Err(invalid(format!(
            "a = {a} with m = {m} has m² + a < 0: the centrifugal barrier no longer prevents collapse"
        )));
    }
    if n < n_r + 2 || !(r_max > 0.0) {
        return Err(invalid("radial grid too small"));
    }
    let h = r_max / n as f64;
    let r = |j: usize| (j as f64 + 0.5) * h;
    let face = |j: usize| j as f64 * h;
    let diag: Vec<f64> = (0..n)
        .map(|j| {
            let rj = r(j);
            (face(j + 1) + face(j)) / (h * h * rj) + 0.5 * rj * rj + (m2 + a) / (rj * rj)
        })
        .collect();
    let off: Vec<f64> = (0..n - 1)
        .map(|j| -face(j + 1) / (h * h * (r(j) * r(j + 1)).sqrt()))
        .collect();
    let pairs = tridiagonal_lowest(&diag, &off, n_r + 1)?;
    Ok(pairs[n_r].0)
}

/// [`radial_energy`] at `RADIAL_NODES` and twice that, combined by
/// second-order Richardson extrapolation. Returns `(extrapolated, spread)`
/// where `spread` is the fine/extrapolated difference.
pub fn radial_energy_extrapolated(a: f64, n_r: usize, m: i32) -> Result<(f64, f64)> {
    let coarse = radial_energy(a, n_r, m, RADIAL_NODES, RADIAL_EXTENT)?;
    let fine = radial_energy(a, n_r, m, 2 * RADIAL_NODES, RADIAL_EXTENT)?;
    let e = (4.0 * fine - coarse) / 3.0;
    Ok((e, (fine - e).abs()))
}

/// Extrapolated energy of the `r²/2 + a/r²` family for `(n_r, m)`.
pub fn radial_separable_energies(a: f64, n_r: usize, m: i32) -> Result<f64> {
    Ok(radial_energy_extrapolated(a, n_r, m)?.0)
}

/// A tabulated oracle with a self-check residual.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCase {
    pub name: String,
    /// Human-readable range of validity.
    pub domain: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Largest substitution (or self-consistency) residual of the table.
    pub residual: f64,
}

impl OracleCase {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let s: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", s.join(","))?;
        }
        Ok(())
    }
}

/// Drift envelope sampled on `[0, t_max]`.
pub fn drift_case(t_max: f64, samples: usize) -> OracleCase {
    let samples = samples.max(2);
    let mut rows = Vec::with_capacity(samples);
    let mut residual = 0.0f64;
    for i in 0..samples {
        let t = t_max * i as f64 / (samples - 1) as f64;
        let (b, db) = drift_beta(t);
        residual = residual.max(envelope_residual(b, db, 2.0, 0.0).abs());
        rows.push(vec![t, b, db]);
    }
    OracleCase {
        name: "drift-envelope".into(),
        domain: format!("K = 0, t in [0, {t_max}]"),
        columns: vec!["t".into(), "beta".into(), "dbeta".into()],
        rows,
        residual,
    }
}

/// Oscillator levels `0..count` with their substitution residuals.
pub fn oscillator_case(count: usize) -> OracleCase {
    let xs: Vec<f64> = (0..81).map(|i| -6.0 + 0.15 * i as f64).collect();
    let mut residual = 0.0f64;
    let rows = (0..count)
        .map(|n| {
            let r = oscillator_residual(n, &xs);
            residual = residual.max(r);
            vec![n as f64, oscillator_energy(n), r]
        })
        .collect();
    OracleCase {
        name: "oscillator-levels".into(),
        domain: "1D, V = x^2/2".into(),
        columns: vec!["n".into(), "energy".into(), "residual".into()],
        rows,
        residual,
    }
}

/// Radial energies for every combination of the given strengths, radial
/// indices and angular numbers.
pub fn radial_case(strengths: &[f64], n_r_max: usize, m_max: i32) -> Result<OracleCase> {
    let mut rows = Vec::new();
    let mut residual = 0.0f64;
    for &a in strengths {
        for m in 0..=m_max {
            for n_r in 0..=n_r_max {
                let (e, spread) = radial_energy_extrapolated(a, n_r, m)?;
                residual = residual.max(spread);
                rows.push(vec![a, n_r as f64, m as f64, e, spread]);
            }
        }
    }
    Ok(OracleCase {
        name: "polar-inverse-square".into(),
        domain: "2D, V = r^2/2 + a/r^2, m^2 + a >= 0".into(),
        columns: ["a", "n_r", "m", "energy", "spread"]
            .map(String::from)
            .to_vec(),
        rows,
        residual,
    })
}

/// Populations of normalized-frame oscillator modes along a lab trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    /// `(t, τ)` per sample.
    pub times: Vec<(f64, f64)>,
    /// `|c_n|²` per sample, `n_modes` entries each.
    pub populations: Vec<Vec<f64>>,
    /// `max_t |c_n(t)|² − |c_n(0)|²` per mode.
    pub drift: Vec<f64>,
    /// Drift of `Σ_n |c_n|²`.
    pub total_drift: f64,
    pub warnings: Vec<String>,
}

impl InvariantReport {
    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.populations.first().map_or(0, Vec::len);
        let cols: Vec<String> = (0..n).map(|k| format!("p{k}")).collect();
        writeln!(w, "t,tau,{}", cols.join(","))?;
        for ((t, tau), p) in self.times.iter().zip(&self.populations) {
            let s: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{t},{tau},{}", s.join(","))?;
        }
        Ok(())
    }
}

/// Checks whether `n_modes` oscillator modes are representable on `grid`:
/// the outermost turning point must sit well inside the box and the largest
/// local wavenumber below the grid Nyquist limit.
fn basis_warning(grid: &GridSpec, n_modes: usize) -> Option<String> {
    let e = oscillator_energy(n_modes.saturating_sub(1));
    let turning = (2.0 * e).sqrt();
    let axis = grid.axis(0);
    let k_max = PI / axis.spacing();
    let mut msgs = Vec::new();
    if 1.5 * turning + 4.0 > axis.l_half {
        msgs.push(format!(
            "mode {} reaches x = {turning:.3}, too close to the box edge {}",
            n_modes - 1,
            axis.l_half
        ));
    }
    if 2.0 * e.sqrt() > k_max {
        msgs.push(format!(
            "mode {} needs wavenumbers near {:.3}, above half the grid limit {k_max:.3}",
            n_modes - 1,
            e.sqrt()
        ));
    }
    (!msgs.is_empty()).then(|| format!("projection basis under-resolved: {}", msgs.join("; ")))
}

/// Transforms every lab field with its frame onto `target` (1D) and
/// projects on the first `n_modes` oscillator eigenfunctions.
pub fn lewis_riesenfeld_check(
    fields: &[WaveField],
    frames: &[TransformFrame],
    target: &GridSpec,
    n_modes: usize,
) -> Result<InvariantReport> {
    if fields.len() != frames.len() || fields.is_empty() {
        return Err(invalid(format!(
            "need one frame per field, got {} fields and {} frames",
            fields.len(),
            frames.len()
        )));
    }
    if target.dim() != 1 || n_modes == 0 {
        return Err(invalid(
            "population check needs a 1D target grid and at least one mode",
        ));
    }
    let dx = target.cell_volume();
    let basis: Vec<Vec<f64>> = {
        let per_node: Vec<Vec<f64>> = target
            .nodes()
            .map(|r| hermite_functions(n_modes, r[0]))
            .collect();
        (0..n_modes)
            .map(|k| per_node.iter().map(|v| v[k]).collect())
            .collect()
    };
    let mut warnings: Vec<String> = basis_warning(target, n_modes).into_iter().collect();
    let mut times = Vec::new();
    let mut populations = Vec::new();
    for (field, frame) in fields.iter().zip(frames) {
        let out = ermakov_forward(field, frame, target)?;
        if let Some(w) = out.warning {
            warnings.push(format!("t = {}: {w}", frame.t));
        }
        let pops: Vec<f64> = basis
            .iter()
            .map(|phi| {
                let c: C64 = phi.iter().zip(&out.field.values).map(|(p, v)| v * *p).sum();
                (c * dx).norm_sqr()
            })
            .collect();
        times.push((frame.t, frame.tau));
        populations.push(pops);
    }
    let first = populations[0].clone();
    let drift = (0..n_modes)
        .map(|k| {
            populations
                .iter()
                .map(|p| (p[k] - first[k]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let total0: f64 = first.iter().sum();
    let total_drift = populations
        .iter()
        .map(|p| (p.iter().sum::<f64>() - total0).abs())
        .fold(0.0, f64::max);
    Ok(InvariantReport {
        times,
        populations,
        drift,
        total_drift,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_values() {
        assert_eq!(drift_beta(0.0), (1.0, 0.0));
        assert_eq!(drift_beta(1.0), (2.0, 2.0));
        assert_eq!(drift_beta(3.0), (10.0, 6.0));
        assert!(drift_case(5.0, 51).residual < 1e-10);
    }

    #[test]
    fn oscillator_levels() {
        assert!((oscillator_energy(0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((oscillator_energy(1) - 2.121_32).abs() < 1e-5);
        assert!((OSCILLATOR_LENGTH - 2f64.powf(0.25)).abs() < 1e-15);
        let case = oscillator_case(12);
        assert!(case.residual < 1e-10, "{}", case.residual);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = GridSpec::line(512, 14.0).unwrap();
        let dx = g.cell_volume();
        let vals: Vec<Vec<f64>> = g.nodes().map(|r| hermite_functions(8, r[0])).collect();
        for a in 0..8 {
            for b in 0..8 {
                let s: f64 = vals.iter().map(|v| v[a] * v[b]).sum::<f64>() * dx;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "({a},{b}) {s}");
            }
        }
        // Ground state is exp(-x²/(2√2)) up to normalization.
        let x = 0.9;
        let ratio = hermite_functions(1, x)[0] / hermite_functions(1, 0.0)[0];
        assert!((ratio - (-x * x / (2.0 * SQRT_2)).exp()).abs() < 1e-15);
    }

    #[test]
    fn radial_oracle_matches_laguerre_levels() {
        // Independent closed form for this family: E = √2 (2 n_r + √(m² + a) + 1).
        for (a, n_r, m) in [
            (0.0, 0, 0),
            (1.0, 0, 0),
            (1.0, 1, 0),
            (0.0, 0, 1),
            (2.0, 0, 1),
        ] {
            let e = radial_separable_energies(a, n_r, m).unwrap();
            let exact = SQRT_2 * (2.0 * n_r as f64 + ((m * m) as f64 + a).sqrt() + 1.0);
            assert!(
                (e - exact).abs() < 1e-6,
                "a={a} n_r={n_r} m={m}: {e} vs {exact}"
            );
        }
    }

    #[test]
    fn radial_oracle_rejects_collapse() {
        assert!(radial_energy(-0.5, 0, 0, 100, 10.0).is_err());
        assert!(radial_energy(-0.5, 0, 1, 100, 10.0).is_ok());
    }

    #[test]
    fn stationary_populations() {
        let g = GridSpec::line(256, 12.0).unwrap();
        let (_, psi) = oscillator_eigens(0, &g).unwrap();
        let rep = lewis_riesenfeld_check(
            &[psi.clone(), psi],
            &[TransformFrame::identity(0.0), TransformFrame::identity(0.0)],
            &g,
            6,
        )
        .unwrap();
        assert!((rep.populations[0][0] - 1.0).abs() < 1e-12);
        assert!(rep.populations[0][1..].iter().all(|p| *p < 1e-20));
        assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
        assert!(rep.max_drift() == 0.0);
    }

    #[test]
    fn under_resolved_basis_warns() {
        let g = GridSpec::line(32, 5.0).unwrap();
        assert!(basis_warning(&g, 20).is_some());
        assert!(basis_warning(&GridSpec::line(512, 16.0).unwrap(), 20).is_none());
    }
}
