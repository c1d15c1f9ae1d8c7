//! Radial large solutions computed in phase-plane variables.
//!
//! Along a radial solution with `u' > 0` the pair `(g, r)` with
//! `g = F(u) − u'²/2` satisfies, with `u` as independent variable,
//!
//! ```text
//! dg/du = (N−1)/r · v,   dr/du = 1/v,   v = √(2(F(u) − g)).
//! ```
//!
//! Near the centre the equation `u'' + (N−1)/r·u' = f(u)` is integrated in
//! `r`; once `F(u)` is large the solver hands over to the system above,
//! which stays regular all the way to blow-up. Distances to the blow-up
//! radius are accumulated backward from the far end so that small values of
//! `d = R∞ − r` keep full relative precision.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::nonlinearity::{Nonlinearity, NonlinearityError};
use crate::numerics::{
    fd_weights_first, hermite, integrate_finite, integrate_tail, invert_monotone, Evaluator, QuadError,
};
use crate::ode::{integrate, Controls, OdeError, Step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("profile terminated at u = {u}: F(u) - g <= 0")]
    Terminated { u: f64 },
    #[error("Keller-Osserman condition does not hold for {0}")]
    KoFails(String),
    #[error("no blow-up radius bracket for the centre value: {0}")]
    Shooting(String),
    #[error("query outside the computed range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Relative local error per step of the phase-plane integration.
pub const PHASE_RTOL: f64 = 1e-10;
const INNER_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub u: f64,
    pub g: f64,
    pub r: f64,
    /// Distance to the blow-up radius, `R∞ − r`.
    pub d: f64,
    pub v: f64,
}

/// Sampled solution of the phase-plane system.
#[derive(Debug, Clone)]
pub struct PhasePath {
    dim: usize,
    nl: Nonlinearity,
    samples: Vec<PhaseSample>,
    r_inf: f64,
}

struct RawStep {
    u: f64,
    g: f64,
    r: f64,
    dr: f64,
    v: f64,
}

fn phase_rhs(nl: &Nonlinearity, dim: usize) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    let k = (dim as f64) - 1.0;
    move |u, y| {
        let v = (2.0 * (nl.big_f(u) - y[0])).sqrt();
        if !(v > 0.0) {
            return [f64::NAN; 2];
        }
        [k / y[1] * v, 1.0 / v]
    }
}

fn integrate_raw(
    nl: &Nonlinearity,
    dim: usize,
    u_start: f64,
    g_start: f64,
    r_start: f64,
    u_stop: f64,
) -> Result<Vec<RawStep>, PhaseError> {
    let v_start = (2.0 * (nl.big_f(u_start) - g_start)).sqrt();
    if !(v_start > 0.0) {
        return Err(PhaseError::Terminated { u: u_start });
    }
    let mut out = vec![RawStep {
        u: u_start,
        g: g_start,
        r: r_start,
        dr: 0.0,
        v: v_start,
    }];
    if u_stop <= u_start {
        return Ok(out);
    }
    let rhs = phase_rhs(nl, dim);
    let scale = nl.scale();
    let hmax = |u: f64| (0.01 * u.abs().max(scale)).min(u_stop - u);
    let norm = |s: &Step<2>| {
        let eg = s.err[0].abs() / (PHASE_RTOL * (nl.big_f(s.t) - s.y[0]).abs().max(s.y[0].abs()));
        let er = s.err[1].abs() / (PHASE_RTOL * s.incr[1].abs());
        if dim == 1 { er } else { eg.max(er) }
    };
    let ctl = Controls {
        h0: 1e-3 * u_start.abs().max(scale),
        h_max: &hmax,
        norm: &norm,
        max_steps: 2_000_000,
    };
    let end = u_stop - 1e-13 * u_stop.abs().max(1.0);
    let result = integrate(&rhs, u_start, [g_start, r_start], &ctl, &mut |s| {
        let g = if dim == 1 { g_start } else { s.y[0] };
        out.push(RawStep {
            u: s.t,
            g,
            r: s.y[1],
            dr: s.incr[1],
            v: 1.0 / s.dy[1],
        });
        s.t < end
    });
    match result {
        Ok(()) => Ok(out),
        Err(OdeError::StepUnderflow { t }) | Err(OdeError::NonFinite { t }) => Err(PhaseError::Terminated { u: t }),
        Err(e) => Err(e.into()),
    }
}

/// `∫_{u_stop}^∞ du/√(2(F − g))` with `g` continued by its leading growth
/// `(N−1)/r·(G(u) − G(u_stop))`.
fn tail_distance(nl: &Nonlinearity, dim: usize, last: &RawStep) -> Result<f64, PhaseError> {
    let desc = nl
        .tail()
        .descriptor(0.5, 0.0)
        .ok_or_else(|| PhaseError::KoFails(nl.label().to_string()))?;
    if desc.diverges() {
        return Ok(f64::INFINITY);
    }
    let k = (dim as f64 - 1.0) / last.r;
    let (u0, g0) = (last.u, last.g);
    let g_base = if dim > 1 { nl.big_g(u0) } else { 0.0 };
    let integrand = |t: f64| {
        let g = if dim > 1 { g0 + k * (nl.big_g(t) - g_base) } else { g0 };
        let big_f = nl.big_f(t);
        if big_f.is_infinite() {
            return 0.0;
        }
        1.0 / (2.0 * (big_f - g)).sqrt()
    };
    let mut desc = desc;
    desc.cutoff = desc.cutoff.max(u0);
    match integrate_tail(&integrand, u0, &desc, nl.spec())? {
        crate::numerics::Integral::Finite(v) => Ok(v),
        crate::numerics::Integral::Infinite => Ok(f64::INFINITY),
    }
}

fn assemble_path(nl: &Nonlinearity, dim: usize, raw: Vec<RawStep>) -> Result<PhasePath, PhaseError> {
    let last = raw.last().expect("at least the start sample");
    let tail = tail_distance(nl, dim, last)?;
    let r_inf = last.r + tail;
    let n = raw.len();
    let mut samples = vec![
        PhaseSample {
            u: 0.0,
            g: 0.0,
            r: 0.0,
            d: 0.0,
            v: 0.0
        };
        n
    ];
    let mut d = tail;
    for i in (0..n).rev() {
        let s = &raw[i];
        samples[i] = PhaseSample {
            u: s.u,
            g: s.g,
            r: s.r,
            d,
            v: s.v,
        };
        d += s.dr;
    }
    Ok(PhasePath {
        dim,
        nl: nl.clone(),
        samples,
        r_inf,
    })
}

/// Integrates the phase-plane system from `(u_start, g_start, r_start)` to
/// `u_stop` and estimates the blow-up radius.
pub fn integrate_phase(
    nl: &Nonlinearity,
    dim: usize,
    u_start: f64,
    g_start: f64,
    r_start: f64,
    u_stop: f64,
) -> Result<PhasePath, PhaseError> {
    if dim == 0 {
        return Err(PhaseError::InvalidInput("dimension must be at least 1".into()));
    }
    if !(r_start > 0.0 && r_start <= 1.0) {
        return Err(PhaseError::InvalidInput(format!("r_start = {r_start} outside (0, 1]")));
    }
    if !(nl.big_f(u_start) - g_start > 0.0) {
        return Err(PhaseError::Terminated { u: u_start });
    }
    let raw = integrate_raw(nl, dim, u_start, g_start, r_start, u_stop)?;
    assemble_path(nl, dim, raw)
}

impl PhasePath {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn samples(&self) -> &[PhaseSample] {
        &self.samples
    }

    pub fn blowup_radius(&self) -> f64 {
        self.r_inf
    }

    pub fn u_min(&self) -> f64 {
        self.samples[0].u
    }

    pub fn u_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].u
    }

    /// Copy with radii measured so that the blow-up radius is exactly 1.
    pub fn translated(&self) -> PhasePath {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.r = 1.0 - s.d;
        }
        out.r_inf = 1.0;
        out
    }

    fn locate(&self, u: f64) -> Result<usize, PhaseError> {
        if !(u >= self.u_min() && u <= self.u_max()) {
            return Err(PhaseError::OutOfRange(format!(
                "u = {u} not in [{}, {}]",
                self.u_min(),
                self.u_max()
            )));
        }
        let i = self.samples.partition_point(|s| s.u <= u);
        Ok(i.clamp(1, self.samples.len() - 1) - 1)
    }

    fn dg(&self, s: &PhaseSample) -> f64 {
        (self.dim as f64 - 1.0) / s.r * s.v
    }

    /// Error term `g(u)` by cubic Hermite interpolation with exact slopes.
    pub fn g_at(&self, u: f64) -> Result<f64, PhaseError> {
        let i = self.locate(u)?;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        Ok(hermite(a.u, b.u, a.g, b.g, self.dg(a), self.dg(b), u))
    }

    /// `v(u) = √(2(F(u) − g(u)))`.
    pub fn v_at(&self, u: f64) -> Result<f64, PhaseError> {
        Ok((2.0 * (self.nl.big_f(u) - self.g_at(u)?)).sqrt())
    }

    /// `d(u) = R∞ − r(u)`, interpolated in `ln d` with exact slopes.
    pub fn d_at(&self, u: f64) -> Result<f64, PhaseError> {
        let i = self.locate(u)?;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let (sa, sb) = (-1.0 / (a.v * a.d), -1.0 / (b.v * b.d));
        Ok(hermite(a.u, b.u, a.d.ln(), b.d.ln(), sa, sb, u).exp())
    }

    pub fn r_at(&self, u: f64) -> Result<f64, PhaseError> {
        Ok(self.r_inf - self.d_at(u)?)
    }

    /// Inverse of [`PhasePath::d_at`].
    pub fn u_at_d(&self, d: f64) -> Result<f64, PhaseError> {
        let n = self.samples.len();
        let (d_hi, d_lo) = (self.samples[0].d, self.samples[n - 1].d);
        if !(d <= d_hi && d >= d_lo) {
            return Err(PhaseError::OutOfRange(format!("d = {d} not in [{d_lo:e}, {d_hi:e}]")));
        }
        let j = self.samples.partition_point(|s| s.d > d).clamp(1, n - 1);
        let (a, b) = (&self.samples[j - 1], &self.samples[j]);
        if d == a.d {
            return Ok(a.u);
        }
        if d == b.d {
            return Ok(b.u);
        }
        let target = d.ln();
        let h = |u: f64| {
            let (sa, sb) = (-1.0 / (a.v * a.d), -1.0 / (b.v * b.d));
            hermite(a.u, b.u, a.d.ln(), b.d.ln(), sa, sb, u)
        };
        invert_monotone(&h, target, (a.u, b.u), 1e-15 * target.abs().max(1.0))
            .map_err(|e| PhaseError::OutOfRange(e.to_string()))
    }

    /// Largest relative residual of `dg/du = (N−1)v/r` and `dr/du = 1/v`,
    /// with derivatives from five-point differences of the stored samples.
    pub fn ode_residual(&self) -> f64 {
        let s = &self.samples;
        let mut worst: f64 = 0.0;
        if s.len() < 5 {
            return 0.0;
        }
        for i in 2..s.len() - 2 {
            let xs: Vec<f64> = s[i - 2..=i + 2].iter().map(|p| p.u).collect();
            let w = fd_weights_first(s[i].u, &xs);
            // The increments of r are carried through d to avoid cancellation.
            let dd: f64 = w.iter().zip(&s[i - 2..=i + 2]).map(|(w, p)| w * (p.d - s[i].d)).sum();
            let rel_r = (-dd * s[i].v - 1.0).abs();
            worst = worst.max(rel_r);
            if self.dim > 1 {
                let dg: f64 = w.iter().zip(&s[i - 2..=i + 2]).map(|(w, p)| w * (p.g - s[i].g)).sum();
                let exact = self.dg(&s[i]);
                worst = worst.max((dg / exact - 1.0).abs());
            } else {
                let drift = s[i - 2..=i + 2].iter().map(|p| (p.g - s[i].g).abs()).fold(0.0, f64::max);
                worst = worst.max(drift / (1.0 + self.nl.big_f(s[i].u)));
            }
        }
        worst
    }

    /// Writes `u,g,r,v` rows at 17 significant digits.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "u,g,r,v")?;
        for s in &self.samples {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", s.u, s.g, s.r, s.v)?;
        }
        Ok(())
    }
}

/// Sample of the centre segment, integrated in `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSample {
    pub r: f64,
    pub u: f64,
    pub du: f64,
}

/// Knobs for [`solve_large_solution_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Required `|R∞ − 1|` of the centre value.
    pub tol_radius: f64,
    /// The phase path is continued until `R₀(u) ≤ d_floor`.
    pub d_floor: f64,
    /// Hand-over when `F(u) ≥ switch_factor·max(1, F(u_c))`.
    pub switch_factor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_radius: 1e-8,
            d_floor: 1e-8,
            switch_factor: 1e4,
        }
    }
}

/// Radial large solution on the unit ball.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    /// Phase path with radii `1 − d`.
    path: PhasePath,
    center_value: f64,
    inner: Vec<InnerSample>,
    /// Blow-up radius of the computed profile before translation.
    raw_radius: f64,
    shooting: Vec<(f64, f64)>,
    overlap_rel_diff: f64,
}

struct Shot {
    inner: Vec<InnerSample>,
    overlap: Vec<InnerSample>,
    path: Option<PhasePath>,
    radius: f64,
}

fn shoot(nl: &Nonlinearity, dim: usize, u_c: f64, u_stop: f64, opts: &SolveOptions, keep: bool) -> Result<Shot, PhaseError> {
    let k = dim as f64 - 1.0;
    let f_c = nl.f(u_c);
    if !(f_c > 0.0) {
        return Err(PhaseError::InvalidInput(format!("f(u_c) = {f_c} at u_c = {u_c}")));
    }
    let threshold = opts.switch_factor * nl.big_f(u_c).max(1.0);
    let length = (u_c.abs().max(1.0) / f_c).sqrt();
    let r0 = 1e-4 * length.min(1.0);
    let y0 = [u_c + f_c * r0 * r0 / (2.0 * dim as f64), f_c * r0 / dim as f64];
    let rhs = |r: f64, y: &[f64; 2]| [y[1], nl.f(y[0]) - k / r * y[1]];
    let hmax = |_r: f64| 0.005;
    let norm = |s: &Step<2>| {
        let eu = s.err[0].abs() / (INNER_RTOL * s.y[0].abs().max(nl.scale()));
        let ew = s.err[1].abs() / (INNER_RTOL * s.y[1].abs().max(1e-300));
        eu.max(ew)
    };
    let ctl = Controls {
        h0: r0,
        h_max: &hmax,
        norm: &norm,
        max_steps: 2_000_000,
    };
    let mut inner = vec![
        InnerSample { r: 0.0, u: u_c, du: 0.0 },
        InnerSample { r: r0, u: y0[0], du: y0[1] },
    ];
    let mut overlap = Vec::new();
    let mut switch_at: Option<InnerSample> = None;
    let overlap_top = 10.0 * threshold;
    let mut escaped = false;
    integrate(&rhs, r0, y0, &ctl, &mut |s| {
        let sample = InnerSample { r: s.t, u: s.y[0], du: s.y[1] };
        if s.t > 1e3 {
            escaped = true;
            return false;
        }
        let big_f = nl.big_f(sample.u);
        match switch_at {
            None => {
                inner.push(sample);
                if big_f >= threshold && sample.du > 0.0 {
                    switch_at = Some(sample);
                    return keep;
                }
                true
            }
            Some(_) => {
                overlap.push(sample);
                big_f < overlap_top
            }
        }
    })?;
    let Some(sw) = switch_at else {
        if escaped {
            return Ok(Shot { inner, overlap, path: None, radius: f64::INFINITY });
        }
        return Err(PhaseError::Shooting(format!("inner integration stalled at u_c = {u_c}")));
    };
    let g_start = nl.big_f(sw.u) - 0.5 * sw.du * sw.du;
    let raw = integrate_raw(nl, dim, sw.u, g_start, sw.r, u_stop.max(sw.u))?;
    let path = assemble_path(nl, dim, raw)?;
    let radius = path.blowup_radius();
    Ok(Shot { inner, overlap, path: Some(path), radius })
}

/// Solves `u'' + (N−1)/r·u' = f(u)`, `u'(0) = 0`, `u → ∞` as `r → 1⁻` by
/// shooting on the centre value.
pub fn solve_large_solution(nl: &Nonlinearity, dim: usize, tol_radius: f64) -> Result<RadialSolution, PhaseError> {
    solve_large_solution_with(nl, dim, &SolveOptions { tol_radius, ..SolveOptions::default() })
}

pub fn solve_large_solution_with(nl: &Nonlinearity, dim: usize, opts: &SolveOptions) -> Result<RadialSolution, PhaseError> {
    if dim == 0 {
        return Err(PhaseError::InvalidInput("dimension must be at least 1".into()));
    }
    if !crate::nonlinearity::keller_osserman(nl).holds() {
        return Err(PhaseError::KoFails(nl.label().to_string()));
    }
    let a = nl.a();
    let scale = nl.scale();
    // Shooting only needs R∞, which the tail continuation delivers accurately
    // from a moderate stopping point.
    let u_stop_shoot = nl.r0_inverse(1e-5)?;
    let history = std::cell::RefCell::new(Vec::new());
    let h = |x: f64| {
        let u_c = a + x;
        let r = match shoot(nl, dim, u_c, u_stop_shoot, opts, false) {
            Ok(s) => s.radius,
            Err(PhaseError::Terminated { .. }) => f64::INFINITY,
            Err(_) => f64::NAN,
        };
        history.borrow_mut().push((u_c, r));
        r
    };
    let guess = nl.r0_inverse(1.0).map(|u| u - a).unwrap_or(scale).max(1e-3 * scale);
    let x = invert_monotone(&h, 1.0, (guess, 2.0 * guess + scale), opts.tol_radius)
        .map_err(|e| PhaseError::Shooting(e.to_string()))?;
    let mut history = history.into_inner();
    let u_c = a + x;
    let u_stop = nl.r0_inverse(opts.d_floor)?;
    let shot = shoot(nl, dim, u_c, u_stop, opts, true)?;
    let raw_path = shot
        .path
        .ok_or_else(|| PhaseError::Shooting(format!("centre value {u_c} does not blow up")))?;
    let raw_radius = raw_path.blowup_radius();
    if !((raw_radius - 1.0).abs() <= 10.0 * opts.tol_radius) {
        return Err(PhaseError::Shooting(format!("blow-up radius {raw_radius} after shooting")));
    }
    let mut overlap_rel_diff: f64 = 0.0;
    for s in &shot.overlap {
        let d = raw_radius - s.r;
        if let Ok(u) = raw_path.u_at_d(d) {
            overlap_rel_diff = overlap_rel_diff.max((u / s.u - 1.0).abs());
        }
    }
    history.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(RadialSolution {
        path: raw_path.translated(),
        center_value: u_c,
        inner: shot.inner,
        raw_radius,
        shooting: history,
        overlap_rel_diff,
    })
}

impl RadialSolution {
    pub fn path(&self) -> &PhasePath {
        &self.path
    }

    pub fn center_value(&self) -> f64 {
        self.center_value
    }

    pub fn inner(&self) -> &[InnerSample] {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.path.dim
    }

    /// Blow-up radius of the profile before radii were re-measured from it.
    pub fn raw_radius(&self) -> f64 {
        self.raw_radius
    }

    /// `(u_c, R∞(u_c))` for every centre value tried, sorted by `u_c`.
    pub fn shooting_history(&self) -> &[(f64, f64)] {
        &self.shooting
    }

    /// Largest relative disagreement between the `r`-integration and the
    /// phase path on their overlap window.
    pub fn overlap_rel_diff(&self) -> f64 {
        self.overlap_rel_diff
    }

    /// `d = 1 − r` at the hand-over point.
    pub fn switch_distance(&self) -> f64 {
        self.path.samples[0].d
    }

    /// `u` at distance `d = 1 − r` from the boundary.
    pub fn u_at_distance(&self, d: f64) -> Result<f64, PhaseError> {
        if d <= self.switch_distance() {
            return self.path.u_at_d(d);
        }
        let r = self.raw_radius - d;
        if r < 0.0 {
            return Err(PhaseError::OutOfRange(format!("d = {d} beyond the centre")));
        }
        let n = self.inner.len();
        let i = self.inner.partition_point(|s| s.r <= r).clamp(1, n - 1) - 1;
        let (a, b) = (&self.inner[i], &self.inner[i + 1]);
        Ok(hermite(a.r, b.r, a.u, b.u, a.du, b.du, r))
    }

    pub fn u_at(&self, r: f64) -> Result<f64, PhaseError> {
        self.u_at_distance(1.0 - r)
    }

    /// `g(u)` along the solution, defined beyond the hand-over point.
    pub fn g_at(&self, u: f64) -> Result<f64, PhaseError> {
        self.path.g_at(u)
    }

    /// Largest relative ODE residual over the inner samples and the path.
    pub fn ode_residual(&self) -> f64 {
        let k = self.dim() as f64 - 1.0;
        let nl = &self.path.nl;
        let s = &self.inner;
        let mut worst = self.path.ode_residual();
        for i in 3..s.len().saturating_sub(2) {
            let xs: Vec<f64> = s[i - 2..=i + 2].iter().map(|p| p.r).collect();
            let w = fd_weights_first(s[i].r, &xs);
            let ddu: f64 = w.iter().zip(&s[i - 2..=i + 2]).map(|(w, p)| w * (p.du - s[i].du)).sum();
            let rhs = nl.f(s[i].u) - k / s[i].r * s[i].du;
            let lhs_scale = nl.f(s[i].u).abs() + (k / s[i].r * s[i].du).abs();
            worst = worst.max((ddu - rhs).abs() / lhs_scale);
        }
        worst
    }
}

/// `g(u)` along a solution as a shareable evaluator (NaN outside the path).
pub fn error_term(sol: &RadialSolution) -> Evaluator {
    let path = sol.path.clone();
    Arc::new(move |u| path.g_at(u).unwrap_or(f64::NAN))
}

/// One row of [`pair_gap_estimates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGapRow {
    pub d: f64,
    pub u1: f64,
    pub u2: f64,
    /// `u₁ − u₂` at equal distance `d`.
    pub gap: f64,
    /// `F(u₁) − F(u₂)`.
    pub f_diff: f64,
    /// `∫_{u₂}^∞ dt/F`.
    pub bound: f64,
    /// `|u₁ − u₂| / ∫_{u₂}^∞ dt/F`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGapReport {
    pub c1: f64,
    pub c2: f64,
    pub rows: Vec<PairGapRow>,
    pub max_abs_f_diff: f64,
    /// `max ratio / min ratio − 1` over the rows.
    pub ratio_spread: f64,
}

/// One-dimensional profiles with energies `v² = 2(F + C_i)` blowing up at
/// `r = 1`, compared at equal distances `d`.
///
/// The gap `u₁ − u₂` is far below the resolution of `u` itself, so it is
/// obtained from `∫_{u₂}^{u₁} dt/v₁ = ∫_{u₂}^∞ (1/v₁ − 1/v₂) dt`, whose
/// right side is evaluated without cancellation.
pub fn pair_gap_estimates(nl: &Nonlinearity, c1: f64, c2: f64, distances: &[f64]) -> Result<PairGapReport, PhaseError> {
    let desc = nl
        .tail()
        .descriptor(0.5, 0.0)
        .ok_or_else(|| PhaseError::KoFails(nl.label().to_string()))?;
    let spec = *nl.spec();
    let v = |c: f64, t: f64| (2.0 * (nl.big_f(t) + c)).sqrt();
    let dist = |c: f64, u: f64| -> Result<f64, PhaseError> {
        let g = |t: f64| 1.0 / v(c, t);
        let mut d = desc;
        d.cutoff = d.cutoff.max(u);
        Ok(integrate_tail(&g, u, &d, &spec)?.finite().unwrap_or(f64::INFINITY))
    };
    let mut rows = Vec::with_capacity(distances.len());
    for &d in distances {
        let lo = nl.r0_inverse(d)?;
        let h = |u: f64| dist(c2, u).map(f64::ln).unwrap_or(f64::NAN);
        let u2 = invert_monotone(&h, d.ln(), (0.5 * lo, 2.0 * lo), 1e-15)
            .map_err(|e| PhaseError::OutOfRange(e.to_string()))?;
        let diff = |t: f64| {
            let (a, b) = (v(c1, t), v(c2, t));
            2.0 * (c1 - c2) / (a * b * (a + b))
        };
        let mut dd = nl.tail().descriptor(1.5, 0.0).expect("analytic tail");
        dd.cutoff = dd.cutoff.max(u2);
        let delta = integrate_tail(&diff, u2, &dd, &spec)?.finite().unwrap_or(f64::NAN);
        // delta = ∫(1/v₂ − 1/v₁); solve ∫_{u₂}^{u₂+gap} dt/v₁ = −delta.
        let target = -delta;
        let v2 = v(c1, u2);
        let mut gap = target * v2 + 0.5 * nl.f(u2) * target * target;
        let f_diff = if gap.abs() < 1e-6 * u2 {
            // u₂ + gap is not resolvable; the second-order expansion above is
            // exact to O(gap³) and the midpoint rule to O(gap³ f'').
            gap * nl.f(u2 + 0.5 * gap)
        } else {
            for _ in 0..4 {
                let got = integrate_finite(&|t| 1.0 / v(c1, t), u2, u2 + gap, &spec)?;
                gap += (target - got) * v(c1, u2 + gap);
            }
            integrate_finite(&|t| nl.f(t), u2, u2 + gap, &spec)?
        };
        let mut bd = nl.tail().descriptor(1.0, 0.0).expect("analytic tail");
        bd.cutoff = bd.cutoff.max(u2);
        let bound = integrate_tail(&|t| 1.0 / nl.big_f(t), u2, &bd, &spec)?
            .finite()
            .unwrap_or(f64::INFINITY);
        rows.push(PairGapRow {
            d,
            u1: u2 + gap,
            u2,
            gap,
            f_diff,
            bound,
            ratio: gap.abs() / bound,
        });
    }
    let max_abs_f_diff = rows.iter().map(|r| r.f_diff.abs()).fold(0.0, f64::max);
    let (lo, hi) = rows
        .iter()
        .map(|r| r.ratio)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let ratio_spread = if rows.is_empty() || lo == 0.0 { 0.0 } else { hi / lo - 1.0 };
    Ok(PairGapReport {
        c1,
        c2,
        rows,
        max_abs_f_diff,
        ratio_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::make_power;

    #[test]
    fn one_dimensional_g_is_constant() {
        let nl = make_power(3.0).unwrap();
        let path = integrate_phase(&nl, 1, 2.0, 1.5, 0.5, 1e3).unwrap();
        assert!(path.samples().iter().all(|s| s.g == 1.5));
    }

    #[test]
    fn terminated_profile() {
        let nl = make_power(3.0).unwrap();
        let err = integrate_phase(&nl, 3, 1.0, 10.0, 0.5, 10.0).unwrap_err();
        assert!(matches!(err, PhaseError::Terminated { .. }));
    }

    #[test]
    fn boundary_ratio_g_over_two_big_g() {
        let nl = make_power(3.0).unwrap();
        // Started so that the blow-up radius is close to 1; in general the
        // ratio tends to 1/R∞.
        let r_start = 1.0 - nl.r0(10.0).unwrap();
        let path = integrate_phase(&nl, 3, 10.0, 0.0, r_start, 1e4).unwrap();
        let last = path.samples().last().unwrap();
        let ratio = last.g / (2.0 * nl.big_g(last.u));
        assert!((ratio - 1.0).abs() < 1e-2, "{ratio}");
        assert!((ratio * path.blowup_radius() - 1.0).abs() < 1e-3);
        assert!(path.ode_residual() < 1e-6, "{}", path.ode_residual());
    }

    #[test]
    fn shooting_power_two() {
        let nl = make_power(2.0).unwrap();
        let sol = solve_large_solution(&nl, 1, 1e-8).unwrap();
        let u = sol.u_at_distance(1e-4).unwrap();
        assert!((u * 1e-8 - 6.0).abs() < 1e-2, "{u}");
        assert!(sol.overlap_rel_diff() < 1e-8, "{}", sol.overlap_rel_diff());
    }
}
