//! Piecewise-constant focusing lattices, transfer matrices and beta-function
//! envelopes.
//!
//! A lattice is a periodic sequence of segments with constant focusing
//! strength `K`. Linear motion through a segment obeys Hill's equation
//! `z'' + K z = 0`, solved in closed form by [`segment_matrix`]. The envelope
//! `beta(s)` obeys `(sqrt(beta))'' + K sqrt(beta) = beta^(-3/2)`; it is
//! transported exactly through the Twiss map of each segment rather than by
//! stepping that nonlinear equation, and the phase advance `mu` is the
//! quadrature of `1/beta`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Absolute tolerance used for every phase-advance quadrature.
pub const PHASE_QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Focusing strength, 1/length².
    pub k: f64,
    pub length: f64,
}

/// One period of a piecewise-constant focusing lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    segments: Vec<Segment>,
    // starts[i] is the offset of segment i inside the period; starts[n] == period.
    starts: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("lattice needs at least one segment"));
        }
        let mut starts = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        starts.push(acc);
        for (i, seg) in segments.iter().enumerate() {
            if !seg.k.is_finite() || !seg.length.is_finite() {
                return Err(invalid(format!("segment {i}: non-finite K or L")));
            }
            if seg.length <= 0.0 {
                return Err(invalid(format!(
                    "segment {i}: length must be > 0, got {}",
                    seg.length
                )));
            }
            acc += seg.length;
            starts.push(acc);
        }
        Ok(Self { segments, starts })
    }

    /// Single segment of constant focusing `k`, repeated with period `length`.
    pub fn constant(k: f64, length: f64) -> Result<Self> {
        Self::new(vec![Segment { k, length }])
    }

    /// Builds a lattice from `(K, L)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(k, length)| Segment { k, length })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Period `C`, the sum of all segment lengths.
    pub fn period(&self) -> f64 {
        self.starts[self.segments.len()]
    }

    /// Start offsets of each segment inside a period.
    pub fn segment_starts(&self) -> &[f64] {
        &self.starts[..self.segments.len()]
    }

    /// Locates `s` as `(turn, segment index, offset of the segment start)`.
    ///
    /// Points exactly on a boundary belong to the segment that starts there.
    pub fn locate(&self, s: f64) -> (i64, usize, f64) {
        let c = self.period();
        let turn = (s / c).floor();
        let mut local = s - turn * c;
        let mut turn = turn as i64;
        if local >= c {
            local -= c;
            turn += 1;
        }
        let idx = match self.starts[..self.segments.len()]
            .binary_search_by(|x| x.partial_cmp(&local).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (turn, idx, turn as f64 * c + self.starts[idx])
    }

    /// Focusing strength at longitudinal position (or time) `s`.
    pub fn focusing_at(&self, s: f64) -> f64 {
        self.segments[self.locate(s).1].k
    }

    /// Segment boundaries strictly inside `(s0, s1)`, ascending.
    pub fn boundaries_between(&self, s0: f64, s1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if s1 <= s0 {
            return out;
        }
        let (turn, idx, _) = self.locate(s0);
        let n = self.segments.len();
        let c = self.period();
        let mut turn = turn;
        let mut idx = idx + 1;
        loop {
            if idx == n {
                idx = 0;
                turn += 1;
            }
            let b = turn as f64 * c + self.starts[idx];
            if b >= s1 {
                break;
            }
            if b > s0 {
                out.push(b);
            }
            idx += 1;
        }
        out
    }

    /// Parses the plain-text lattice format: one `K L` pair per line, `#`
    /// starts a comment, blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected `K L`, got {line:?}"),
                });
            }
            let num = |f: &str| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("{f:?}: {e}"),
                })
            };
            segments.push(Segment {
                k: num(fields[0])?,
                length: num(fields[1])?,
            });
        }
        Self::new(segments)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# K L\n");
        for seg in &self.segments {
            out.push_str(&format!("{:e} {:e}\n", seg.k, seg.length));
        }
        out
    }
}

/// Real 2×2 transfer matrix acting on `(z, z')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    /// `next ∘ self`: transport through `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self {
            m11: next.m11 * self.m11 + next.m12 * self.m21,
            m12: next.m11 * self.m12 + next.m12 * self.m22,
            m21: next.m21 * self.m11 + next.m22 * self.m21,
            m22: next.m21 * self.m12 + next.m22 * self.m22,
        }
    }

    pub fn apply(&self, z: f64, p: f64) -> (f64, f64) {
        (self.m11 * z + self.m12 * p, self.m21 * z + self.m22 * p)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.m11 - other.m11,
            self.m12 - other.m12,
            self.m21 - other.m21,
            self.m22 - other.m22,
        ]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

// Closed-form Hill flow over a length `l >= 0` of constant focusing `k`.
pub(crate) fn flow(k: f64, l: f64) -> TransferMatrix {
    if k > 0.0 {
        let w = k.sqrt();
        let (s, c) = (w * l).sin_cos();
        TransferMatrix {
            m11: c,
            m12: s / w,
            m21: -w * s,
            m22: c,
        }
    } else if k < 0.0 {
        let w = (-k).sqrt();
        let (s, c) = ((w * l).sinh(), (w * l).cosh());
        TransferMatrix {
            m11: c,
            m12: s / w,
            m21: w * s,
            m22: c,
        }
    } else {
        TransferMatrix {
            m11: 1.0,
            m12: l,
            m21: 0.0,
            m22: 1.0,
        }
    }
}

/// Exact flow map of `z'' + K z = 0` over a segment of length `l`.
pub fn segment_matrix(k: f64, l: f64) -> Result<TransferMatrix> {
    if !k.is_finite() || !l.is_finite() {
        return Err(invalid(format!("non-finite segment (K = {k}, L = {l})")));
    }
    if l <= 0.0 {
        return Err(invalid(format!("segment length must be > 0, got {l}")));
    }
    Ok(flow(k, l))
}

/// Ordered product of the segment maps over one period.
pub fn one_turn_matrix(lattice: &LatticeSpec) -> TransferMatrix {
    lattice
        .segments()
        .iter()
        .fold(TransferMatrix::IDENTITY, |acc, seg| {
            acc.then(&flow(seg.k, seg.length))
        })
}

/// Envelope state at one longitudinal position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFrame {
    pub s: f64,
    pub beta: f64,
    pub dbeta: f64,
    pub mu: f64,
    /// Accumulated `∫ ds / beta`; identical to `mu` and kept as the time
    /// variable of the normalized frame.
    pub tau: f64,
}

impl EnvelopeFrame {
    pub fn new(s: f64, beta: f64, dbeta: f64) -> Self {
        Self {
            s,
            beta,
            dbeta,
            mu: 0.0,
            tau: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        -0.5 * self.dbeta
    }

    pub fn gamma(&self) -> f64 {
        let a = self.alpha();
        (1.0 + a * a) / self.beta
    }

    // Twiss transport through `m`, phase left untouched.
    fn transported(&self, m: &TransferMatrix) -> (f64, f64) {
        let (b0, a0, g0) = (self.beta, self.alpha(), self.gamma());
        let beta = m.m11 * m.m11 * b0 - 2.0 * m.m11 * m.m12 * a0 + m.m12 * m.m12 * g0;
        let alpha = -m.m11 * m.m21 * b0 + (m.m11 * m.m22 + m.m12 * m.m21) * a0 - m.m12 * m.m22 * g0;
        (beta, -2.0 * alpha)
    }
}

/// Periodic (matched) envelope at `s = 0` with `mu = tau = 0`.
pub fn matched_envelope(lattice: &LatticeSpec) -> Result<EnvelopeFrame> {
    let m = one_turn_matrix(lattice);
    let (_, sin_mu) = matched_phase(&m)?;
    let beta = m.m12 / sin_mu;
    let alpha = (m.m11 - m.m22) / (2.0 * sin_mu);
    Ok(EnvelopeFrame::new(0.0, beta, -2.0 * alpha))
}

/// One-period phase advance `mu_C` of a stable lattice, in `(0, 2π)`.
///
/// `mu_C ∈ (0, π)` when `m12 > 0` and `(π, 2π)` when `m12 < 0`, which keeps
/// `beta0 = m12 / sin(mu_C)` positive.
pub fn cell_phase_advance(lattice: &LatticeSpec) -> Result<f64> {
    let m = one_turn_matrix(lattice);
    let (cos_mu, _) = matched_phase(&m)?;
    let base = cos_mu.acos();
    Ok(if m.m12 > 0.0 { base } else { 2.0 * PI - base })
}

fn matched_phase(m: &TransferMatrix) -> Result<(f64, f64)> {
    let trace = m.trace();
    if !(trace.abs() < 2.0) {
        return Err(Error::UnstableLattice {
            trace,
            trace_abs: trace.abs(),
        });
    }
    let cos_mu = 0.5 * trace;
    let sin_mu = m.m12.signum() * (1.0 - cos_mu * cos_mu).sqrt();
    Ok((cos_mu, sin_mu))
}

fn check_beta(s: f64, beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 1e-300) {
        return Err(Error::SingularEnvelope { s, beta });
    }
    Ok(())
}

/// Envelope transported from a start frame through a lattice, with knots at
/// every segment boundary so any point can be evaluated in closed form.
#[derive(Debug, Clone)]
pub struct EnvelopeTrack {
    lattice: LatticeSpec,
    knots: Vec<EnvelopeFrame>,
}

impl EnvelopeTrack {
    /// Transports `start` (located at `start.s`) up to `s_end`.
    pub fn new(lattice: &LatticeSpec, start: EnvelopeFrame, s_end: f64) -> Result<Self> {
        if !(start.beta > 0.0) || !start.beta.is_finite() || !start.dbeta.is_finite() {
            return Err(invalid(format!(
                "envelope start needs finite beta > 0, got beta = {}, beta' = {}",
                start.beta, start.dbeta
            )));
        }
        if !s_end.is_finite() || s_end < start.s {
            return Err(invalid(format!(
                "s_end = {s_end} must be >= start s = {}",
                start.s
            )));
        }
        let mut knots = vec![start];
        let mut stops = lattice.boundaries_between(start.s, s_end);
        if s_end > start.s {
            stops.push(s_end);
        }
        for s in stops {
            let prev = *knots.last().unwrap();
            let next = advance(lattice, &prev, s)?;
            knots.push(next);
        }
        Ok(Self {
            lattice: lattice.clone(),
            knots,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn start(&self) -> &EnvelopeFrame {
        &self.knots[0]
    }

    pub fn end(&self) -> &EnvelopeFrame {
        self.knots.last().unwrap()
    }

    /// Frames at the start, every segment boundary, and the end.
    pub fn knots(&self) -> &[EnvelopeFrame] {
        &self.knots
    }

    fn knot_before_s(&self, s: f64) -> Result<&EnvelopeFrame> {
        let first = self.knots[0].s;
        let last = self.end().s;
        let slack = 1e-12 * (1.0 + last.abs());
        if s < first - slack || s > last + slack {
            return Err(invalid(format!(
                "s = {s} outside envelope range [{first}, {last}]"
            )));
        }
        let i = self.knots.partition_point(|k| k.s <= s);
        Ok(&self.knots[i.saturating_sub(1)])
    }

    /// Envelope at `s`, including accumulated phase.
    pub fn at(&self, s: f64) -> Result<EnvelopeFrame> {
        let knot = self.knot_before_s(s)?;
        if s == knot.s {
            return Ok(*knot);
        }
        advance(&self.lattice, knot, s)
    }

    /// `beta` and `beta'` at `s` without the phase quadrature.
    pub fn beta_at(&self, s: f64) -> Result<(f64, f64)> {
        let knot = self.knot_before_s(s)?;
        let k = self.lattice.focusing_at(knot.s);
        Ok(knot.transported(&flow(k, s - knot.s)))
    }

    /// Inverts the phase: returns the `s` at which `mu(s) = mu`.
    pub fn s_at_phase(&self, mu: f64) -> Result<f64> {
        let first = self.knots[0].mu;
        let last = self.end().mu;
        let slack = 1e-12 * (1.0 + last.abs());
        if mu < first - slack || mu > last + slack {
            return Err(invalid(format!(
                "phase {mu} outside envelope range [{first}, {last}]"
            )));
        }
        let i = self.knots.partition_point(|k| k.mu <= mu);
        if i == self.knots.len() {
            return Ok(self.end().s);
        }
        let a = self.knots[i.saturating_sub(1)];
        if mu == a.mu {
            return Ok(a.s);
        }
        let b = self.knots[i.min(self.knots.len() - 1)];
        let kval = self.lattice.focusing_at(a.s);
        let beta_of = |s: f64| a.transported(&flow(kval, s - a.s)).0;
        let phase_of = |s: f64| {
            a.mu + quadrature::integrate(|x| 1.0 / beta_of(x), a.s, s, PHASE_QUADRATURE_TOL)
        };
        // Newton on a monotone function, safeguarded by the bracket [lo, hi].
        let (mut lo, mut hi) = (a.s, b.s);
        let mut s = a.s + (mu - a.mu) / (b.mu - a.mu) * (b.s - a.s);
        for _ in 0..100 {
            let f = phase_of(s) - mu;
            if f.abs() < 1e-14 {
                break;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = s - f * beta_of(s);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() < 1e-15 * (1.0 + s.abs()) {
                s = next;
                break;
            }
            s = next;
        }
        Ok(s)
    }

    /// Frames sampled at `n_per_segment` equal steps within every knot
    /// interval, with incrementally accumulated phase.
    pub fn sample(&self, n_per_segment: usize) -> Vec<EnvelopeFrame> {
        let n = n_per_segment.max(1);
        let mut out = vec![self.knots[0]];
        for pair in self.knots.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let kval = self.lattice.focusing_at(a.s);
            let mut prev = a;
            for j in 1..=n {
                let s = if j == n {
                    b.s
                } else {
                    a.s + (b.s - a.s) * j as f64 / n as f64
                };
                let (beta, dbeta) = a.transported(&flow(kval, s - a.s));
                let prev_frame = prev;
                let dmu = quadrature::integrate(
                    |x| 1.0 / prev_frame.transported(&flow(kval, x - prev_frame.s)).0,
                    prev.s,
                    s,
                    PHASE_QUADRATURE_TOL,
                );
                let frame = EnvelopeFrame {
                    s,
                    beta,
                    dbeta,
                    mu: prev.mu + dmu,
                    tau: prev.tau + dmu,
                };
                out.push(frame);
                prev = frame;
            }
        }
        out
    }
}

// Transport `from` to `s` within the segment that contains `from.s`.
fn advance(lattice: &LatticeSpec, from: &EnvelopeFrame, s: f64) -> Result<EnvelopeFrame> {
    let k = lattice.focusing_at(from.s);
    let m = flow(k, s - from.s);
    let (beta, dbeta) = from.transported(&m);
    check_beta(s, beta)?;
    let f0 = *from;
    let dmu = quadrature::integrate(
        |x| 1.0 / f0.transported(&flow(k, x - f0.s)).0,
        from.s,
        s,
        PHASE_QUADRATURE_TOL,
    );
    if !dmu.is_finite() {
        return Err(Error::SingularEnvelope { s, beta });
    }
    Ok(EnvelopeFrame {
        s,
        beta,
        dbeta,
        mu: from.mu + dmu,
        tau: from.tau + dmu,
    })
}

/// Propagates an envelope frame through the lattice to `s_end`.
pub fn propagate_envelope(
    frame: &EnvelopeFrame,
    lattice: &LatticeSpec,
    s_end: f64,
) -> Result<EnvelopeFrame> {
    Ok(*EnvelopeTrack::new(lattice, *frame, s_end)?.end())
}

/// Matched envelope of a stable lattice, evaluated periodically for any `s`.
#[derive(Debug, Clone)]
pub struct MatchedEnvelope {
    period: EnvelopeTrack,
    mu_cell: f64,
}

impl MatchedEnvelope {
    pub fn new(lattice: &LatticeSpec) -> Result<Self> {
        let start = matched_envelope(lattice)?;
        let period = EnvelopeTrack::new(lattice, start, lattice.period())?;
        let mu_cell = period.end().mu;
        Ok(Self { period, mu_cell })
    }

    /// Phase advance accumulated over one period (not reduced mod 2π).
    pub fn cell_phase(&self) -> f64 {
        self.mu_cell
    }

    pub fn one_period(&self) -> &EnvelopeTrack {
        &self.period
    }

    fn reduce(&self, s: f64) -> (f64, f64) {
        let c = self.period.lattice().period();
        let turns = (s / c).floor();
        let mut local = s - turns * c;
        let mut turns = turns;
        if local >= c {
            local -= c;
            turns += 1.0;
        }
        (turns, local.max(0.0))
    }

    pub fn at(&self, s: f64) -> Result<EnvelopeFrame> {
        let (turns, local) = self.reduce(s);
        let mut f = self.period.at(local)?;
        f.s = s;
        f.mu += turns * self.mu_cell;
        f.tau = f.mu;
        Ok(f)
    }

    pub fn beta_at(&self, s: f64) -> Result<(f64, f64)> {
        let (_, local) = self.reduce(s);
        self.period.beta_at(local)
    }
}

/// Writes envelope frames as CSV with header `s,beta,dbeta,mu,tau`.
pub fn write_envelope_csv<W: Write>(mut w: W, frames: &[EnvelopeFrame]) -> std::io::Result<()> {
    writeln!(w, "s,beta,dbeta,mu,tau")?;
    for f in frames {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            f.s, f.beta, f.dbeta, f.mu, f.tau
        )?;
    }
    Ok(())
}
