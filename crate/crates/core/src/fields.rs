//! Uniform periodic grids and the complex fields that live on them.
//!
//! Nodes along an axis sit at `-l_half + i * dx`, `dx = 2 l_half / n`, so the
//! extent is the half-open box `[-l_half, l_half)`. Two-dimensional values are
//! stored row-major with axis 0 (x) slowest.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

pub const MIN_AXIS_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub l_half: f64,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        2.0 * self.l_half / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l_half + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumbers in FFT order. The Nyquist entry carries `-π/dx`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = PI / self.l_half;
        (0..self.n)
            .map(|j| {
                if j < self.n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - self.n as f64) * dk
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(invalid(format!(
                "grid dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.n < MIN_AXIS_POINTS || !a.n.is_power_of_two() {
                return Err(invalid(format!(
                    "axis {i}: n = {} must be a power of two >= {MIN_AXIS_POINTS}",
                    a.n
                )));
            }
            if !(a.l_half.is_finite() && a.l_half > 0.0) {
                return Err(invalid(format!(
                    "axis {i}: l_half = {} must be > 0",
                    a.l_half
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn line(n: usize, l_half: f64) -> Result<Self> {
        Self::new(vec![Axis { n, l_half }])
    }

    pub fn square(n: usize, l_half: f64) -> Result<Self> {
        Self::new(vec![Axis { n, l_half }; 2])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element `Δ^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Coordinates of a flat node index; `y = 0` on 1D grids.
    pub fn node(&self, idx: usize) -> [f64; 2] {
        match self.axes.as_slice() {
            [a] => [a.coord(idx), 0.0],
            [a, b] => [a.coord(idx / b.n), b.coord(idx % b.n)],
            _ => unreachable!(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// The same node count with every extent multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.axes
                .iter()
                .map(|a| Axis {
                    n: a.n,
                    l_half: a.l_half * factor,
                })
                .collect(),
        )
    }

    /// `|k|²` for every node of the spectral grid, flat in storage order.
    pub fn k_squared(&self) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => a.wavenumbers().iter().map(|k| k * k).collect(),
            [a, b] => {
                let (ka, kb) = (a.wavenumbers(), b.wavenumbers());
                let mut out = Vec::with_capacity(a.n * b.n);
                for x in &ka {
                    for y in &kb {
                        out.push(x * x + y * y);
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Wavenumber along `axis` for every node, flat; the Nyquist mode is
    /// zeroed so the first derivative stays anti-Hermitian.
    pub fn k_component(&self, axis: usize) -> Vec<f64> {
        let mut comp: Vec<Vec<f64>> = self.axes.iter().map(Axis::wavenumbers).collect();
        for (a, k) in self.axes.iter().zip(comp.iter_mut()) {
            k[a.n / 2] = 0.0;
        }
        match self.axes.len() {
            1 => comp[0].clone(),
            _ => {
                let (n0, n1) = (self.axes[0].n, self.axes[1].n);
                let mut out = Vec::with_capacity(n0 * n1);
                for i in 0..n0 {
                    for j in 0..n1 {
                        out.push(if axis == 0 { comp[0][i] } else { comp[1][j] });
                    }
                }
                out
            }
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// FFT plans for one grid. Forward is unnormalized, inverse divides by `N`.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid
            .axes()
            .iter()
            .map(|a| planner.plan_fft_forward(a.n))
            .collect();
        let inverse = grid
            .axes()
            .iter()
            .map(|a| planner.plan_fft_inverse(a.n))
            .collect();
        Self {
            grid: grid.clone(),
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>]) {
        match self.grid.axes() {
            [_] => plans[0].process(data),
            [a, b] => {
                // Rows are contiguous; columns go through a transpose.
                plans[1].process(data);
                let mut t = vec![C64::new(0.0, 0.0); data.len()];
                transpose(data, &mut t, a.n, b.n);
                plans[0].process(&mut t);
                transpose(&t, data, b.n, a.n);
            }
            _ => unreachable!(),
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Spectral Laplacian `∇²ψ`.
    pub fn laplacian(&self, values: &[C64]) -> Vec<C64> {
        let k2 = self.grid.k_squared();
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        buf.iter_mut().zip(&k2).for_each(|(v, k)| *v *= -k);
        self.inverse(&mut buf);
        buf
    }

    /// Spectral first derivative along `axis`.
    pub fn derivative(&self, values: &[C64], axis: usize) -> Vec<C64> {
        let k = self.grid.k_component(axis);
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        buf.iter_mut()
            .zip(&k)
            .for_each(|(v, k)| *v *= C64::new(0.0, *k));
        self.inverse(&mut buf);
        buf
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

fn sum_abs2(values: &[C64]) -> f64 {
    values.iter().map(C64::norm_sqr).sum()
}

fn inner_raw(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Complex scalar field on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    pub time: f64,
}

impl WaveField {
    pub fn new(grid: GridSpec, values: Vec<C64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(invalid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        let values = vec![C64::new(0.0, 0.0); grid.len()];
        Self { grid, values, time }
    }

    pub fn from_fn<F: Fn([f64; 2]) -> C64>(grid: GridSpec, time: f64, f: F) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values, time }
    }

    /// Riemann sum `Σ|ψ|² Δ^dim`.
    pub fn norm2(&self) -> f64 {
        sum_abs2(&self.values) * self.grid.cell_volume()
    }

    /// Rescales to unit `norm2`; a zero field is left unchanged.
    pub fn normalize(&mut self) -> &mut Self {
        let n = self.norm2();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            self.values.iter_mut().for_each(|v| *v *= s);
        }
        self
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn scale(&mut self, c: C64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `Σ w(r)|ψ|²Δ^dim / norm2`, zero for the zero field.
    pub fn expect<F: Fn([f64; 2]) -> f64>(&self, w: F) -> f64 {
        let total = sum_abs2(&self.values);
        if total == 0.0 {
            return 0.0;
        }
        self.grid
            .nodes()
            .zip(&self.values)
            .map(|(r, v)| w(r) * v.norm_sqr())
            .sum::<f64>()
            / total
    }

    pub fn expect_x(&self) -> f64 {
        self.expect(|r| r[0])
    }

    pub fn expect_r2(&self) -> f64 {
        self.expect(|r| r[0] * r[0] + r[1] * r[1])
    }

    /// Mean momentum along `axis` with the momentum operator `-i√2 ∂`.
    pub fn expect_p(&self, spectral: &Spectral, axis: usize) -> f64 {
        let total = sum_abs2(&self.values);
        if total == 0.0 {
            return 0.0;
        }
        let d = spectral.derivative(&self.values, axis);
        let raw = inner_raw(&self.values, &d);
        (C64::new(0.0, -std::f64::consts::SQRT_2) * raw).re / total
    }

    /// `⟨self|other⟩ = Σ conj(self) other Δ^dim`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.grid.check_same(&other.grid)?;
        Ok(inner_raw(&self.values, &other.values) * self.grid.cell_volume())
    }

    /// `|⟨a|b⟩| / (‖a‖‖b‖)`; 1 means equal up to a global phase.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ip = self.inner(other)?;
        let denom = (self.norm2() * other.norm2()).sqrt();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(ip.norm() / denom)
    }

    /// Largest magnitude on the outermost nodes relative to the global maximum.
    pub fn edge_ratio(&self) -> f64 {
        edge_ratio(&self.grid, &[&self.values])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.grid.dim() != 1 {
            return Err(invalid("CSV export is defined for 1D fields only"));
        }
        writeln!(w, "x,re,im,abs2")?;
        for (r, v) in self.grid.nodes().zip(&self.values) {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                r[0],
                v.re,
                v.im,
                v.norm_sqr()
            )?;
        }
        Ok(())
    }

    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<()> {
        write_snapshot(w, &self.grid, self.time, &[&self.values])
    }

    pub fn read_snapshot<R: Read>(r: R) -> Result<Self> {
        let (grid, time, mut comps) = read_snapshot(r)?;
        if comps.len() != 1 {
            return Err(Error::Format(format!(
                "expected one component, found {}",
                comps.len()
            )));
        }
        Self::new(grid, comps.pop().unwrap(), time)
    }
}

/// Two-component spinor field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: GridSpec,
    pub up: Vec<C64>,
    pub down: Vec<C64>,
    pub time: f64,
}

impl SpinorField {
    pub fn new(grid: GridSpec, up: Vec<C64>, down: Vec<C64>, time: f64) -> Result<Self> {
        if up.len() != grid.len() || down.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "spinor components of {} and {} values on a grid of {}",
                up.len(),
                down.len(),
                grid.len()
            )));
        }
        let bad = |v: &C64| !(v.re.is_finite() && v.im.is_finite());
        if up.iter().chain(&down).any(bad) {
            return Err(invalid("non-finite spinor value"));
        }
        Ok(Self {
            grid,
            up,
            down,
            time,
        })
    }

    /// `χ(r) ⊗ (a, b)`: a spatial profile times a fixed spin state.
    pub fn product(scalar: &WaveField, spin: [C64; 2]) -> Self {
        Self {
            grid: scalar.grid.clone(),
            up: scalar.values.iter().map(|v| v * spin[0]).collect(),
            down: scalar.values.iter().map(|v| v * spin[1]).collect(),
            time: scalar.time,
        }
    }

    pub fn component(&self, which: usize) -> WaveField {
        WaveField {
            grid: self.grid.clone(),
            values: if which == 0 {
                self.up.clone()
            } else {
                self.down.clone()
            },
            time: self.time,
        }
    }

    pub fn from_components(up: WaveField, down: WaveField) -> Result<Self> {
        up.grid.check_same(&down.grid)?;
        Self::new(up.grid, up.values, down.values, up.time)
    }

    pub fn norm2(&self) -> f64 {
        (sum_abs2(&self.up) + sum_abs2(&self.down)) * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) -> &mut Self {
        let n = self.norm2();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            self.up
                .iter_mut()
                .chain(self.down.iter_mut())
                .for_each(|v| *v *= s);
        }
        self
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.grid.check_same(&other.grid)?;
        Ok(
            (inner_raw(&self.up, &other.up) + inner_raw(&self.down, &other.down))
                * self.grid.cell_volume(),
        )
    }

    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ip = self.inner(other)?;
        let denom = (self.norm2() * other.norm2()).sqrt();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(ip.norm() / denom)
    }

    pub fn edge_ratio(&self) -> f64 {
        edge_ratio(&self.grid, &[&self.up, &self.down])
    }

    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<()> {
        write_snapshot(w, &self.grid, self.time, &[&self.up, &self.down])
    }

    pub fn read_snapshot<R: Read>(r: R) -> Result<Self> {
        let (grid, time, mut comps) = read_snapshot(r)?;
        if comps.len() != 2 {
            return Err(Error::Format(format!(
                "expected two components, found {}",
                comps.len()
            )));
        }
        let down = comps.pop().unwrap();
        let up = comps.pop().unwrap();
        Self::new(grid, up, down, time)
    }
}

fn edge_ratio(grid: &GridSpec, comps: &[&[C64]]) -> f64 {
    let mut max = 0.0f64;
    let mut edge = 0.0f64;
    for c in comps {
        for (idx, v) in c.iter().enumerate() {
            let m = v.norm();
            max = max.max(m);
            let on_edge = match grid.axes() {
                [a] => idx == 0 || idx == a.n - 1,
                [a, b] => {
                    let (i, j) = (idx / b.n, idx % b.n);
                    i == 0 || i == a.n - 1 || j == 0 || j == b.n - 1
                }
                _ => unreachable!(),
            };
            if on_edge {
                edge = edge.max(m);
            }
        }
    }
    if max == 0.0 {
        0.0
    } else {
        edge / max
    }
}

/// Relative edge magnitude above which resampling reports possible aliasing.
pub const ALIASING_EDGE_RATIO: f64 = 1e-6;

/// Resampled field plus an optional accuracy warning.
#[derive(Debug, Clone)]
pub struct Resampled<T> {
    pub field: T,
    pub warning: Option<String>,
}

// Periodic sinc for an even number of nodes: the trigonometric interpolant of
// a unit sample at u = 0 (Nyquist mode split symmetrically).
fn periodic_sinc(n: usize, u: f64) -> f64 {
    let h = 0.5 * u;
    let s = h.sin();
    if s.abs() < 1e-13 {
        return 1.0;
    }
    (n as f64 * h).sin() / (n as f64 * h.tan())
}

fn interpolation_weights(src: &Axis, dst: &Axis) -> Option<Vec<f64>> {
    if src == dst {
        return None;
    }
    let mut w = vec![0.0; dst.n * src.n];
    let tol = 1e-12 * src.l_half;
    for t in 0..dst.n {
        let x = dst.coord(t);
        if x < -src.l_half - tol || x > src.l_half + tol {
            continue;
        }
        for m in 0..src.n {
            let u = PI * (x - src.coord(m)) / src.l_half;
            w[t * src.n + m] = periodic_sinc(src.n, u);
        }
    }
    Some(w)
}

fn resample_values(src: &GridSpec, dst: &GridSpec, values: &[C64]) -> Vec<C64> {
    match (src.axes(), dst.axes()) {
        ([a], [b]) => match interpolation_weights(a, b) {
            None => values.to_vec(),
            Some(w) => (0..b.n)
                .map(|t| {
                    let row = &w[t * a.n..(t + 1) * a.n];
                    row.iter().zip(values).map(|(wi, v)| v * *wi).sum()
                })
                .collect(),
        },
        ([a0, a1], [b0, b1]) => {
            // Axis 1 (within rows) first, then axis 0.
            let w1 = interpolation_weights(a1, b1);
            let w0 = interpolation_weights(a0, b0);
            let mut stage = vec![C64::new(0.0, 0.0); a0.n * b1.n];
            for i in 0..a0.n {
                let row = &values[i * a1.n..(i + 1) * a1.n];
                let out = &mut stage[i * b1.n..(i + 1) * b1.n];
                match &w1 {
                    None => out.copy_from_slice(row),
                    Some(w) => {
                        for (t, o) in out.iter_mut().enumerate() {
                            let wr = &w[t * a1.n..(t + 1) * a1.n];
                            *o = wr.iter().zip(row).map(|(wi, v)| v * *wi).sum();
                        }
                    }
                }
            }
            match &w0 {
                None => stage,
                Some(w) => {
                    let mut out = vec![C64::new(0.0, 0.0); b0.n * b1.n];
                    for t in 0..b0.n {
                        let wr = &w[t * a0.n..(t + 1) * a0.n];
                        let dst_row = &mut out[t * b1.n..(t + 1) * b1.n];
                        for (m, wi) in wr.iter().enumerate() {
                            if *wi == 0.0 {
                                continue;
                            }
                            let src_row = &stage[m * b1.n..(m + 1) * b1.n];
                            for (d, s) in dst_row.iter_mut().zip(src_row) {
                                *d += s * *wi;
                            }
                        }
                    }
                    out
                }
            }
        }
        _ => unreachable!("dimension checked by caller"),
    }
}

fn aliasing_warning(ratio: f64) -> Option<String> {
    (ratio > ALIASING_EDGE_RATIO).then(|| {
        format!(
            "edge magnitude {ratio:.3e} of maximum exceeds {ALIASING_EDGE_RATIO:e}; \
             band-limited resampling may alias"
        )
    })
}

/// Band-limited (trigonometric) interpolation onto `target`. Target nodes
/// outside the source box receive zero.
pub fn resample(field: &WaveField, target: &GridSpec) -> Result<Resampled<WaveField>> {
    if field.grid.dim() != target.dim() {
        return Err(Error::GridMismatch(format!(
            "cannot resample a {}D field onto a {}D grid",
            field.grid.dim(),
            target.dim()
        )));
    }
    let values = resample_values(&field.grid, target, &field.values);
    Ok(Resampled {
        field: WaveField {
            grid: target.clone(),
            values,
            time: field.time,
        },
        warning: aliasing_warning(field.edge_ratio()),
    })
}

pub fn resample_spinor(field: &SpinorField, target: &GridSpec) -> Result<Resampled<SpinorField>> {
    if field.grid.dim() != target.dim() {
        return Err(Error::GridMismatch("spinor resample dimension".into()));
    }
    Ok(Resampled {
        field: SpinorField {
            grid: target.clone(),
            up: resample_values(&field.grid, target, &field.up),
            down: resample_values(&field.grid, target, &field.down),
            time: field.time,
        },
        warning: aliasing_warning(field.edge_ratio()),
    })
}

fn write_snapshot<W: Write>(mut w: W, grid: &GridSpec, time: f64, comps: &[&[C64]]) -> Result<()> {
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    for a in grid.axes() {
        w.write_all(&(a.n as u64).to_le_bytes())?;
    }
    for a in grid.axes() {
        w.write_all(&a.l_half.to_le_bytes())?;
    }
    w.write_all(&time.to_le_bytes())?;
    w.write_all(&(comps.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * grid.len());
    for c in comps {
        buf.clear();
        for v in c.iter() {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_snapshot<R: Read>(mut r: R) -> Result<(GridSpec, f64, Vec<Vec<C64>>)> {
    let dim = read_u64(&mut r)? as usize;
    if !(1..=2).contains(&dim) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let mut ns = Vec::with_capacity(dim);
    for _ in 0..dim {
        ns.push(read_u64(&mut r)? as usize);
    }
    let mut axes = Vec::with_capacity(dim);
    for n in ns {
        axes.push(Axis {
            n,
            l_half: read_f64(&mut r)?,
        });
    }
    let grid = GridSpec::new(axes).map_err(|e| Error::Format(e.to_string()))?;
    let time = read_f64(&mut r)?;
    let ncomp = read_u64(&mut r)? as usize;
    if !(1..=2).contains(&ncomp) {
        return Err(Error::Format(format!(
            "unsupported component count {ncomp}"
        )));
    }
    let mut comps = Vec::with_capacity(ncomp);
    let mut raw = vec![0u8; 16 * grid.len()];
    for _ in 0..ncomp {
        r.read_exact(&mut raw)?;
        let vals = raw
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        comps.push(vals);
    }
    Ok((grid, time, comps))
}

/// Unit-norm Gaussian `exp(-Σ(x_i - c_i)²/(2σ²))` with an optional plane-wave
/// factor `exp(i k·x)`.
pub fn gaussian(grid: &GridSpec, center: [f64; 2], sigma: f64, k: [f64; 2]) -> WaveField {
    WaveField::from_fn(grid.clone(), 0.0, |r| {
        let dx = r[0] - center[0];
        let dy = if grid.dim() == 2 {
            r[1] - center[1]
        } else {
            0.0
        };
        let env = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        C64::from_polar(env, k[0] * r[0] + k[1] * r[1])
    })
    .normalized()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_gaussian_1d(grid: &GridSpec, shift: f64) -> WaveField {
        WaveField::from_fn(grid.clone(), 0.0, |r| {
            let x = r[0] - shift;
            C64::new((-x * x / 2.0).exp() / PI.powf(0.25), 0.0)
        })
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::line(8, 1.0).is_err());
        assert!(GridSpec::line(48, 1.0).is_err());
        assert!(GridSpec::line(64, 0.0).is_err());
        assert!(GridSpec::new(vec![]).is_err());
        assert!(GridSpec::new(vec![Axis { n: 16, l_half: 1.0 }; 3]).is_err());
        let g = GridSpec::square(16, 2.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.node(17), [-2.0 + 0.25, -2.0 + 0.25]);
        assert!((g.cell_volume() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn norm_of_zero_and_gaussian() {
        let g = GridSpec::line(256, 12.0).unwrap();
        assert_eq!(WaveField::zeros(g.clone(), 0.0).norm2(), 0.0);
        let psi = unit_gaussian_1d(&g, 0.0);
        assert!((psi.norm2() - 1.0).abs() < 1e-8);
        let mut scaled = psi.clone();
        scaled.scale(C64::new(0.0, 3.0));
        assert!((scaled.norm2() - 9.0 * psi.norm2()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let g = GridSpec::line(256, 12.0).unwrap();
        let psi = unit_gaussian_1d(&g, 0.0);
        assert!((psi.expect_r2() - 0.5).abs() < 1e-10);
        assert!(psi.expect_x().abs() < 1e-12);
        let shifted = unit_gaussian_1d(&g, 1.7);
        assert!((shifted.expect_x() - 1.7).abs() < 1e-8);

        let g2 = GridSpec::square(64, 8.0).unwrap();
        let psi2 = WaveField::from_fn(g2, 0.0, |r| {
            C64::new((-(r[0] * r[0] + r[1] * r[1]) / 2.0).exp(), 0.0)
        })
        .normalized();
        assert!((psi2.expect_r2() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_field_expectations_are_zero() {
        let g = GridSpec::line(32, 1.0).unwrap();
        let z = WaveField::zeros(g.clone(), 0.0);
        assert_eq!(z.expect_x(), 0.0);
        assert_eq!(z.expect_p(&Spectral::new(&g), 0), 0.0);
    }

    #[test]
    fn parseval() {
        let g = GridSpec::square(32, 5.0).unwrap();
        let psi = gaussian(&g, [0.3, -0.7], 1.1, [0.5, 1.5]);
        let sp = Spectral::new(&g);
        let mut hat = psi.values.clone();
        sp.forward(&mut hat);
        let spectral_norm =
            hat.iter().map(C64::norm_sqr).sum::<f64>() / g.len() as f64 * g.cell_volume();
        assert!((spectral_norm - psi.norm2()).abs() < 1e-12);
        sp.inverse(&mut hat);
        let err = hat
            .iter()
            .zip(&psi.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn laplacian_of_plane_wave() {
        for grid in [
            GridSpec::line(64, 4.0).unwrap(),
            GridSpec::square(32, 4.0).unwrap(),
        ] {
            let dk = PI / 4.0;
            let (kx, ky) = (5.0 * dk, if grid.dim() == 2 { -3.0 * dk } else { 0.0 });
            let f = WaveField::from_fn(grid.clone(), 0.0, |r| {
                C64::from_polar(1.0, kx * r[0] + ky * r[1])
            });
            let lap = Spectral::new(&grid).laplacian(&f.values);
            let k2 = kx * kx + ky * ky;
            let err = lap
                .iter()
                .zip(&f.values)
                .map(|(l, v)| (l + v * k2).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "err = {err}");
        }
    }

    #[test]
    fn momentum_of_boosted_gaussian() {
        let g = GridSpec::line(512, 20.0).unwrap();
        let psi = gaussian(&g, [0.0, 0.0], 1.0, [1.25, 0.0]);
        let p = psi.expect_p(&Spectral::new(&g), 0);
        assert!((p - std::f64::consts::SQRT_2 * 1.25).abs() < 1e-10);
    }

    #[test]
    fn resample_identity_is_exact() {
        let g = GridSpec::line(64, 8.0).unwrap();
        let psi = gaussian(&g, [0.5, 0.0], 1.0, [0.3, 0.0]);
        let out = resample(&psi, &g).unwrap();
        assert_eq!(out.field.values, psi.values);
        assert!(out.warning.is_none());
    }

    #[test]
    fn resample_plane_wave_below_nyquist() {
        let src = GridSpec::line(32, PI).unwrap();
        let dst = GridSpec::line(128, PI).unwrap();
        let f = |r: [f64; 2]| C64::from_polar(1.0, 3.0 * r[0]) + C64::new((5.0 * r[0]).cos(), 0.0);
        let psi = WaveField::from_fn(src, 0.0, f);
        let out = resample(&psi, &dst).unwrap().field;
        let err = dst
            .nodes()
            .zip(&out.values)
            .map(|(r, v)| (v - f(r)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "err = {err}");
    }

    #[test]
    fn resample_flags_edge_content() {
        let g = GridSpec::line(64, 3.0).unwrap();
        let wide = gaussian(&g, [0.0, 0.0], 2.0, [0.0, 0.0]);
        let out = resample(&wide, &GridSpec::line(128, 3.0).unwrap()).unwrap();
        assert!(out.warning.is_some());
    }

    #[test]
    fn snapshot_roundtrip_1d_and_spinor() {
        let g = GridSpec::line(32, 3.0).unwrap();
        let mut psi = gaussian(&g, [0.2, 0.0], 0.8, [1.0, 0.0]);
        psi.time = 1.25;
        let mut buf = Vec::new();
        psi.write_snapshot(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 8 + 8 + 8 + 16 * 32);
        assert_eq!(WaveField::read_snapshot(buf.as_slice()).unwrap(), psi);
        assert!(SpinorField::read_snapshot(buf.as_slice()).is_err());

        let g2 = GridSpec::square(16, 2.0).unwrap();
        let chi = gaussian(&g2, [0.0, 0.0], 0.5, [0.0, 0.0]);
        let sp = SpinorField::product(&chi, [C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let mut buf = Vec::new();
        sp.write_snapshot(&mut buf).unwrap();
        assert_eq!(SpinorField::read_snapshot(buf.as_slice()).unwrap(), sp);
    }

    #[test]
    fn csv_export_is_1d_only() {
        let g = GridSpec::line(16, 1.0).unwrap();
        let mut buf = Vec::new();
        WaveField::zeros(g, 0.0).write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("x,re,im,abs2\n"));
        let g2 = GridSpec::square(16, 1.0).unwrap();
        assert!(WaveField::zeros(g2, 0.0).write_csv(Vec::new()).is_err());
    }
}
