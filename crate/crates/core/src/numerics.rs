//! Quadrature, inversion and interpolation primitives.
//!
//! Everything here works on plain `f64` evaluators. The adaptive rule is the
//! 7-point Gauss / 15-point Kronrod pair with global bisection of the worst
//! interval, which copes with the algebraic endpoint singularities produced
//! near blow-up. Improper integrals are always split at a validated cutoff:
//! the piece beyond the cutoff is integrated in a variable that flattens the
//! declared decay, and the far remainder is added in closed form.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

/// Shared, thread-safe scalar evaluator.
pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand not finite at t = {at}")]
    NonFinite { at: f64 },
    #[error(
        "subdivision budget exhausted: estimate {estimate:e}, error {error:e}, worst interval [{worst_lo}, {worst_hi}] with error {worst_error:e}"
    )]
    Budget {
        estimate: f64,
        error: f64,
        worst_lo: f64,
        worst_hi: f64,
        worst_error: f64,
    },
    #[error("integrand does not match its tail descriptor: expected {expected}, measured {measured} near t = {at}")]
    DescriptorMismatch { expected: f64, measured: f64, at: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvertError {
    #[error("target {target} not bracketed: h({lo}) = {h_lo}, h({hi}) = {h_hi}")]
    NoStraddle {
        target: f64,
        lo: f64,
        hi: f64,
        h_lo: f64,
        h_hi: f64,
    },
    #[error("evaluator returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("abscissae must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("ordinates are not monotone (index {0})")]
    NotMonotone(usize),
    #[error("length mismatch: {0} abscissae, {1} ordinates")]
    LengthMismatch(usize, usize),
}

/// Accuracy contract for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self, QuadError> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(QuadError::InvalidSpec("tolerances must be positive".into()));
        }
        if self.max_subdivisions < 10 {
            return Err(QuadError::InvalidSpec(
                "max_subdivisions must be at least 10".into(),
            ));
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod abscissae mapped to `[-1, 1]` in increasing order, with weights.
pub fn kronrod15_nodes() -> [(f64, f64); 15] {
    let mut out = [(0.0, 0.0); 15];
    for j in 0..7 {
        out[j] = (-XGK[j], WGK[j]);
        out[14 - j] = (XGK[j], WGK[j]);
    }
    out[7] = (0.0, WGK[7]);
    out
}

/// One application of the G7/K15 pair on `[a, b]`: `(kronrod, error)`.
fn gk15(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { at: c });
    }
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (x1, x2) = (c - dx, c + dx);
        let (f1, f2) = (g(x1), g(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { at: x2 });
        }
        rk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((rk * h, ((rk - rg) * h).abs()))
}

/// Non-adaptive 15-point Kronrod estimate of `∫_a^b g`.
pub fn kronrod15(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = g(c) * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        acc += WGK[j] * (g(c - dx) + g(c + dx));
    }
    acc * h
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive estimate of `∫_lo^hi g` with error at most
/// `max(abs_tol, rel_tol·|result|)`.
pub fn integrate_finite(
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(QuadError::InvalidInterval { lo, hi });
    }
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate_finite(g, hi, lo, spec).map(|v| -v);
    }
    let (v, e) = gk15(g, lo, hi)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a: lo,
        b: hi,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut splits = 0usize;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let width_floor = 4.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE);
        if splits >= spec.max_subdivisions || worst.b - worst.a <= width_floor {
            // Roundoff-limited: accept when the residual error is at the
            // level of floating-point noise on the total.
            if total_err <= 64.0 * f64::EPSILON * total.abs().max(spec.abs_tol) {
                return Ok(total);
            }
            return Err(QuadError::Budget {
                estimate: total,
                error: total_err,
                worst_lo: worst.a,
                worst_hi: worst.b,
                worst_error: worst.error,
            });
        }
        let (v1, e1) = gk15(g, worst.a, mid)?;
        let (v2, e2) = gk15(g, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        // Keep the running error from drifting below zero through cancellation.
        if total_err < 0.0 {
            total_err = heap.iter().map(|p| p.error).sum::<f64>() + e1 + e2;
        }
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        splits += 1;
    }
}

/// Declared asymptotic behaviour of an integrand on `[cutoff, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDecay {
    /// `|g(t)| ~ A·t^(-exponent)`.
    Power { exponent: f64 },
    /// `|g(t)| ~ A·e^(-rate·t)` up to algebraic factors.
    Exponential { rate: f64 },
}

/// Descriptor handed to [`integrate_tail`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegrand {
    pub decay: TailDecay,
    /// Point beyond which the decay law is expected to hold.
    pub cutoff: f64,
}

impl TailIntegrand {
    pub fn power(exponent: f64, cutoff: f64) -> Self {
        Self {
            decay: TailDecay::Power { exponent },
            cutoff,
        }
    }

    pub fn exponential(rate: f64, cutoff: f64) -> Self {
        Self {
            decay: TailDecay::Exponential { rate },
            cutoff,
        }
    }

    /// Whether `∫^∞` of an integrand with this decay diverges.
    pub fn diverges(&self) -> bool {
        match self.decay {
            TailDecay::Power { exponent } => exponent <= 1.0,
            TailDecay::Exponential { rate } => rate <= 0.0,
        }
    }
}

/// Value of an improper integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integral {
    Finite(f64),
    Infinite,
}

impl Integral {
    pub fn finite(self) -> Option<f64> {
        match self {
            Integral::Finite(v) => Some(v),
            Integral::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Integral::Infinite)
    }
}

/// Relative tolerance on the measured local exponent (or rate) when
/// validating a tail descriptor.
pub const DESCRIPTOR_TOL: f64 = 0.1;

fn local_power_exponent(g: &dyn Fn(f64) -> f64, t: f64) -> Option<f64> {
    let (a, b) = (g(t), g(2.0 * t));
    if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 || a.signum() != b.signum() {
        return None;
    }
    Some(-(b / a).ln() / std::f64::consts::LN_2)
}

fn local_rate(g: &dyn Fn(f64) -> f64, t: f64, h: f64) -> Option<f64> {
    let (a, b) = (g(t), g(t + h));
    if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 || a.signum() != b.signum() {
        return None;
    }
    Some((a / b).ln() / h)
}

/// Finds the first point at or beyond the declared cutoff where the integrand
/// follows its descriptor on three consecutive probes.
fn validated_cutoff(g: &dyn Fn(f64) -> f64, lo: f64, desc: &TailIntegrand) -> Result<f64, QuadError> {
    let start = lo.max(desc.cutoff);
    let mut last = (f64::NAN, start);
    match desc.decay {
        TailDecay::Power { exponent } => {
            let base = if start > 0.0 { start } else { 1.0_f64.max(start) };
            let tol = DESCRIPTOR_TOL * exponent.abs().max(1.0);
            for k in 0..80 {
                let c = base * 2f64.powi(k);
                let probes: Vec<Option<f64>> =
                    (0..3).map(|j| local_power_exponent(g, c * 2f64.powi(j))).collect();
                if probes.iter().all(|m| m.is_some_and(|m| (m - exponent).abs() <= tol)) {
                    return Ok(c);
                }
                if let Some(Some(m)) = probes.first() {
                    last = (*m, c);
                }
            }
            Err(QuadError::DescriptorMismatch {
                expected: exponent,
                measured: last.0,
                at: last.1,
            })
        }
        TailDecay::Exponential { rate } => {
            let h = 1.0 / rate;
            let tol = DESCRIPTOR_TOL * rate;
            for k in 0..60 {
                let c = start + (2f64.powi(k) - 1.0) * h;
                let probes: Vec<Option<f64>> =
                    (0..3).map(|j| local_rate(g, c + j as f64 * h, h)).collect();
                if probes.iter().all(|m| m.is_some_and(|m| (m - rate).abs() <= tol)) {
                    return Ok(c);
                }
                if let Some(Some(m)) = probes.first() {
                    last = (*m, c);
                }
            }
            Err(QuadError::DescriptorMismatch {
                expected: rate,
                measured: last.0,
                at: last.1,
            })
        }
    }
}

fn usable(v: f64) -> bool {
    v.is_finite() && v.abs() > 1e-290
}

/// `∫_lo^∞ g`, split at a validated cutoff.
///
/// The finite part goes through [`integrate_finite`]. Beyond the cutoff `c`
/// the integral is taken in a variable that makes the declared decay flat
/// (`t = c·x^(-1/(e-1))` for power laws, `t = c - ln(x)/λ` for exponentials)
/// up to the largest point where the integrand is still representable, and
/// the remainder beyond that point is the closed-form leading term.
pub fn integrate_tail(
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    desc: &TailIntegrand,
    spec: &QuadratureSpec,
) -> Result<Integral, QuadError> {
    if desc.diverges() {
        return Ok(Integral::Infinite);
    }
    let c = validated_cutoff(g, lo, desc)?;
    let finite = integrate_finite(g, lo, c, spec)?;
    let tail = match desc.decay {
        TailDecay::Power { exponent } => {
            let mut t_far = c;
            for j in 1..=30 {
                let t = c * 10f64.powi(j);
                if usable(g(t)) {
                    t_far = t;
                } else {
                    break;
                }
            }
            let beta = 1.0 / (exponent - 1.0);
            let x_far = (c / t_far).powf(exponent - 1.0);
            let h = |x: f64| {
                let t = c * x.powf(-beta);
                g(t) * c * beta * x.powf(-beta - 1.0)
            };
            let body = if x_far < 1.0 {
                integrate_finite(&h, x_far, 1.0, spec)?
            } else {
                0.0
            };
            body + g(t_far) * t_far / (exponent - 1.0)
        }
        TailDecay::Exponential { rate } => {
            let mut t_far = c;
            for j in 1..=70 {
                let t = c + 10.0 * j as f64 / rate;
                if usable(g(t)) {
                    t_far = t;
                } else {
                    break;
                }
            }
            let x_far = (-(t_far - c) * rate).exp();
            let h = |x: f64| {
                let t = c - x.ln() / rate;
                g(t) / (rate * x)
            };
            let body = if x_far < 1.0 {
                integrate_finite(&h, x_far, 1.0, spec)?
            } else {
                0.0
            };
            body + g(t_far) / rate
        }
    };
    let total = finite + tail;
    if !total.is_finite() {
        return Err(QuadError::NonFinite { at: c });
    }
    Ok(Integral::Finite(total))
}

/// Solves `h(x) = target` for monotone `h` by regula falsi (Illinois
/// variant) safeguarded with bisection.
///
/// When the bracket does not straddle the target it is widened
/// geometrically on the side where the target lies; positive lower ends stay
/// positive.
pub fn invert_monotone(
    h: &dyn Fn(f64) -> f64,
    target: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64, InvertError> {
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let eval = |x: f64| -> Result<f64, InvertError> {
        let v = h(x) - target;
        if v.is_nan() {
            Err(InvertError::NonFinite { at: x })
        } else {
            Ok(v)
        }
    };
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    let (lo0, hi0, h_lo0, h_hi0) = (lo, hi, f_lo + target, f_hi + target);
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        if expansions >= 64 {
            return Err(InvertError::NoStraddle {
                target,
                lo: lo0,
                hi: hi0,
                h_lo: h_lo0,
                h_hi: h_hi0,
            });
        }
        expansions += 1;
        let increasing = f_hi > f_lo;
        // The root lies beyond hi when moving right brings h closer to target.
        let go_right = (increasing && f_hi < 0.0) || (!increasing && f_hi > 0.0);
        let width = (hi - lo).max(f64::EPSILON * hi.abs().max(1.0));
        if go_right {
            lo = hi;
            f_lo = f_hi;
            hi += 2.0 * width;
            f_hi = eval(hi)?;
        } else {
            hi = lo;
            f_hi = f_lo;
            lo = if lo > 0.0 { lo / 4.0 } else { lo - 2.0 * width };
            f_lo = eval(lo)?;
        }
        if f_lo.is_infinite() && f_hi.is_infinite() {
            return Err(InvertError::NonFinite { at: lo });
        }
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..400 {
        let width = hi - lo;
        let secant_ok = f_lo.is_finite() && f_hi.is_finite();
        let mut x = if secant_ok {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = eval(x)?;
        if fx.abs() <= tol || fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        // Fall back to a plain bisection step when regula falsi stalls.
        if hi - lo > 0.5 * width {
            let m = 0.5 * (lo + hi);
            let fm = eval(m)?;
            if fm.abs() <= tol || fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == f_lo.signum() {
                lo = m;
                f_lo = fm;
            } else {
                hi = m;
                f_hi = fm;
            }
            side = 0;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

/// Cubic Hermite interpolation on `[x0, x1]` with end values and slopes.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to `x`.
#[inline]
pub fn hermite_slope(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -6.0 * t2 + 6.0 * t;
    let dh11 = 3.0 * t2 - 2.0 * t;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

/// Index `i` with `xs[i] <= x < xs[i+1]`, clamped to valid segments.
pub fn segment_index(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
}

/// C¹ shape-preserving piecewise cubic (Fritsch–Butland slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        if xs.len() != ys.len() {
            return Err(InterpError::LengthMismatch(xs.len(), ys.len()));
        }
        let n = xs.len();
        if n < 2 {
            return Err(InterpError::TooFewNodes(n));
        }
        for i in 1..n {
            if !(xs[i] > xs[i - 1]) {
                return Err(InterpError::NotIncreasing(i));
            }
        }
        let up = ys.windows(2).all(|w| w[1] >= w[0]);
        let down = ys.windows(2).all(|w| w[1] <= w[0]);
        if !(up || down) {
            let idx = ys
                .windows(3)
                .position(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
                .map_or(1, |i| i + 1);
            return Err(InterpError::NotMonotone(idx));
        }
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            for i in 1..n - 1 {
                let (s0, s1) = (secants[i - 1], secants[i]);
                slopes[i] = if s0 * s1 <= 0.0 {
                    0.0
                } else {
                    let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    (w1 + w2) / (w1 / s0 + w2 / s1)
                };
            }
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(
                xs[n - 1] - xs[n - 2],
                xs[n - 2] - xs[n - 3],
                secants[n - 2],
                secants[n - 3],
            );
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let i = segment_index(&self.xs, x);
        hermite(
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            x,
        )
    }

    pub fn into_evaluator(self) -> Evaluator {
        Arc::new(move |x| self.eval(x))
    }
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Monotone interpolant of `(xs, ys)` as a shareable evaluator.
pub fn monotone_interpolant(xs: &[f64], ys: &[f64]) -> Result<Evaluator, InterpError> {
    Ok(MonotoneCubic::new(xs.to_vec(), ys.to_vec())?.into_evaluator())
}

/// Geometrically spaced nodes from `start` to `end` inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    nodes: Vec<f64>,
    density: f64,
}

impl LogGrid {
    /// `density` points per decade; the last node is exactly `end`.
    pub fn new(start: f64, end: f64, density: f64) -> Result<Self, InterpError> {
        if !(start > 0.0 && end > start && density > 0.0) {
            return Err(InterpError::NotIncreasing(0));
        }
        let decades = (end / start).log10();
        let cells = (decades * density).ceil().max(1.0) as usize;
        let step = decades / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|k| start * 10f64.powf(k as f64 * step)).collect();
        nodes[0] = start;
        nodes[cells] = end;
        Ok(Self { nodes, density })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Node positions `base + scale·2^(k/4)` covering `(base, top]`, preceded by
/// `base` itself. Gaps never exceed `max_width`.
fn offset_nodes(base: f64, scale: f64, top: f64, max_width: f64) -> Vec<f64> {
    let mut nodes = vec![base];
    let mut k = -32i32;
    loop {
        let last = *nodes.last().unwrap();
        let mut x = base + scale * 2f64.powf(k as f64 / 4.0);
        if x - last > max_width {
            x = last + max_width;
        } else {
            k += 1;
        }
        if x > top {
            break;
        }
        if x > last {
            nodes.push(x);
        }
    }
    nodes
}

/// `x ↦ ∫_base^x g`, with node values computed up front so that each query
/// costs one adaptive integral over at most one short segment.
#[derive(Clone)]
pub struct Antiderivative {
    integrand: Evaluator,
    nodes: Vec<f64>,
    values: Vec<f64>,
    spec: QuadratureSpec,
}

impl std::fmt::Debug for Antiderivative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Antiderivative")
            .field("base", &self.nodes[0])
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl Antiderivative {
    pub fn new(
        integrand: Evaluator,
        base: f64,
        scale: f64,
        top: f64,
        spec: QuadratureSpec,
    ) -> Result<Self, QuadError> {
        Self::with_max_width(integrand, base, scale, top, f64::INFINITY, spec)
    }

    /// Like [`Antiderivative::new`] with node gaps capped at `max_width`,
    /// for oscillating integrands.
    pub fn with_max_width(
        integrand: Evaluator,
        base: f64,
        scale: f64,
        top: f64,
        max_width: f64,
        spec: QuadratureSpec,
    ) -> Result<Self, QuadError> {
        let nodes = offset_nodes(base, scale, top, max_width);
        let mut values = Vec::with_capacity(nodes.len());
        values.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += integrate_finite(&*integrand, w[0], w[1], &spec)?;
            values.push(acc);
        }
        Ok(Self {
            integrand,
            nodes,
            values,
            spec,
        })
    }

    pub fn base(&self) -> f64 {
        self.nodes[0]
    }

    pub fn try_eval(&self, x: f64) -> Result<f64, QuadError> {
        if x <= self.nodes[0] {
            return integrate_finite(&*self.integrand, self.nodes[0], x, &self.spec);
        }
        let i = self.nodes.partition_point(|&n| n <= x) - 1;
        let i = i.min(self.nodes.len() - 1);
        Ok(self.values[i] + integrate_finite(&*self.integrand, self.nodes[i], x, &self.spec)?)
    }

    /// Panics only if the integrand misbehaves on a range that was fine at
    /// construction; use [`Antiderivative::try_eval`] to observe errors.
    pub fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

/// `x ↦ ∫_x^∞ g`, cached like [`Antiderivative`].
#[derive(Clone)]
pub struct TailIntegral {
    integrand: Evaluator,
    desc: TailIntegrand,
    nodes: Vec<f64>,
    values: Vec<f64>,
    spec: QuadratureSpec,
}

impl std::fmt::Debug for TailIntegral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TailIntegral")
            .field("from", &self.nodes[0])
            .field("nodes", &self.nodes.len())
            .field("desc", &self.desc)
            .finish()
    }
}

impl TailIntegral {
    /// Fails with `Ok(None)`-like semantics folded into an error when the
    /// descriptor declares divergence.
    pub fn new(
        integrand: Evaluator,
        desc: TailIntegrand,
        base: f64,
        scale: f64,
        top: f64,
        spec: QuadratureSpec,
    ) -> Result<Self, QuadError> {
        if desc.diverges() {
            return Err(QuadError::DescriptorMismatch {
                expected: f64::NAN,
                measured: f64::INFINITY,
                at: base,
            });
        }
        let mut nodes = offset_nodes(base, scale, top, f64::INFINITY);
        // Start the analytic tail while the integrand is still far from
        // underflow, so that the descriptor check has values to measure.
        while let [.., _, last] = nodes[..] {
            let v = integrand(last);
            if v.is_finite() && v.abs() > 1e-200 {
                break;
            }
            nodes.pop();
        }
        let n = nodes.len();
        let mut values = vec![0.0; n];
        values[n - 1] = integrate_tail(&*integrand, nodes[n - 1], &desc, &spec)?
            .finite()
            .expect("convergent descriptor");
        for i in (0..n - 1).rev() {
            values[i] = values[i + 1] + integrate_finite(&*integrand, nodes[i], nodes[i + 1], &spec)?;
        }
        Ok(Self {
            integrand,
            desc,
            nodes,
            values,
            spec,
        })
    }

    pub fn try_eval(&self, x: f64) -> Result<f64, QuadError> {
        let n = self.nodes.len();
        if x >= self.nodes[n - 1] {
            return integrate_tail(&*self.integrand, x, &self.desc, &self.spec)
                .map(|v| v.finite().unwrap_or(f64::INFINITY));
        }
        if x <= self.nodes[0] {
            return Ok(self.values[0] + integrate_finite(&*self.integrand, x, self.nodes[0], &self.spec)?);
        }
        let i = self.nodes.partition_point(|&v| v <= x);
        Ok(self.values[i] + integrate_finite(&*self.integrand, x, self.nodes[i], &self.spec)?)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

/// Finite-difference weights for the first derivative at `x0` from the
/// nodes `xs` (Fornberg's recursion).
pub fn fd_weights_first(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn polynomial_and_empty() {
        let v = integrate_finite(&|t| t * t, 0.0, 1.0, &spec()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
        assert_eq!(integrate_finite(&|t| t, 2.0, 2.0, &spec()).unwrap(), 0.0);
        let rev = integrate_finite(&|t| t * t, 1.0, 0.0, &spec()).unwrap();
        assert!((rev + 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate_finite(&|t: f64| 1.0 / t.sqrt(), 0.0, 1.0, &spec()).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn budget_exhaustion_reports_worst_interval() {
        let tight = QuadratureSpec::new(1e-14, 1e-300, 10).unwrap();
        let err = integrate_finite(&|t: f64| 1.0 / t.sqrt(), 0.0, 1.0, &tight).unwrap_err();
        match err {
            QuadError::Budget { worst_lo, .. } => assert_eq!(worst_lo, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 1e-10, 100).is_err());
        assert!(QuadratureSpec::new(1e-10, 1e-10, 5).is_err());
    }

    #[test]
    fn tails() {
        let d = TailIntegrand::power(2.0, 1.0);
        let v = integrate_tail(&|t| t.powi(-2), 1.0, &d, &spec()).unwrap();
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-8);
        let d = TailIntegrand::power(1.0, 1.0);
        assert!(integrate_tail(&|t| 1.0 / t, 1.0, &d, &spec()).unwrap().is_infinite());
        let d = TailIntegrand::exponential(1.0, 0.0);
        let v = integrate_tail(&|t: f64| (-t).exp(), 0.0, &d, &spec()).unwrap();
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn slow_power_tail() {
        // ∫_1^∞ t^-1.01 dt = 100
        let d = TailIntegrand::power(1.01, 1.0);
        let v = integrate_tail(&|t: f64| t.powf(-1.01), 1.0, &d, &spec()).unwrap();
        assert!((v.finite().unwrap() - 100.0).abs() < 1e-7);
    }

    #[test]
    fn descriptor_mismatch() {
        let d = TailIntegrand::power(3.0, 1.0);
        let err = integrate_tail(&|t: f64| t.powi(-2), 1.0, &d, &spec()).unwrap_err();
        assert!(matches!(err, QuadError::DescriptorMismatch { .. }));
    }

    #[test]
    fn inversion() {
        let x = invert_monotone(&|x| x * x, 4.0, (0.0, 10.0), 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-10);
        let x = invert_monotone(&|x| 1.0 / x, 2.0, (0.1, 10.0), 1e-12).unwrap();
        assert!((x - 0.5).abs() < 1e-10);
        assert!(invert_monotone(&|x: f64| x.tanh(), 2.0, (0.0, 1.0), 1e-12).is_err());
        // Needs bracket expansion.
        let x = invert_monotone(&|x| x * x * x, 1000.0, (0.0, 1.0), 1e-9).unwrap();
        assert!((x - 10.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_cubic_basics() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 2.0, 4.0, 6.0];
        let m = MonotoneCubic::new(xs.to_vec(), ys.to_vec()).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(m.eval(*x), y);
        }
        assert!((m.eval(1.5) - 3.0).abs() < 1e-14);
        assert!(matches!(
            MonotoneCubic::new(xs.to_vec(), vec![0.0, 1.0, 0.5, 2.0]),
            Err(InterpError::NotMonotone(_))
        ));
    }

    #[test]
    fn fd_weights() {
        let xs = [0.9, 1.0, 1.15, 1.3, 1.6];
        let w = fd_weights_first(1.15, &xs);
        let d: f64 = xs.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((d - 4.0 * 1.15f64.powi(3)).abs() < 1e-10);
    }

    #[test]
    fn log_grid() {
        let g = LogGrid::new(1.0, 1000.0, 10.0).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g.nodes()[0], 1.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cached_integrals() {
        let a = Antiderivative::new(Arc::new(|t: f64| t * t), 0.0, 1.0, 1e3, spec()).unwrap();
        for x in [0.3, 1.0, 7.5, 999.0, 5000.0] {
            assert!((a.eval(x) - x * x * x / 3.0).abs() <= 1e-11 * x.powi(3).max(1.0));
        }
        let t = TailIntegral::new(
            Arc::new(|t: f64| t.powf(-1.5)),
            TailIntegrand::power(1.5, 1.0),
            1.0,
            1.0,
            1e6,
            spec(),
        )
        .unwrap();
        for x in [1.0, 3.3, 1e4, 1e8] {
            assert!((t.eval(x) - 2.0 / x.sqrt()).abs() < 1e-11 * 2.0 / x.sqrt());
        }
    }
}
