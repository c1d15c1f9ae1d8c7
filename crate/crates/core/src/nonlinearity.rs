//! Nonlinearities `f`, their antiderivatives, tail models and the
//! Keller–Osserman tests.

use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::expr::{Expr, ParseError};
use crate::numerics::{
    integrate_finite, integrate_tail, Antiderivative, Evaluator, Integral, QuadError,
    QuadratureSpec, TailIntegral, TailIntegrand,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("positivity violated: f({witness}) = {value}")]
    Positivity { witness: f64, value: f64 },
    #[error("invalid tail model: {0}")]
    InvalidTail(String),
    #[error("tail model mismatch at u = {at}: relative deviation {deviation:e}")]
    TailMismatch { at: f64, deviation: f64 },
    #[error("derivative check failed at u = {at}: F' = {numeric}, f = {exact}")]
    Derivative { at: f64, numeric: f64, exact: f64 },
    #[error("tail integral needs an analytic tail model (Keller-Osserman must hold)")]
    NoAnalyticTail,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Relative deviation allowed between `F` and its tail model beyond the cutoff.
pub const TAIL_VALIDATION_TOL: f64 = 1e-3;

/// Largest value of `F` the solvers are asked to represent.
pub const F_CEILING: f64 = 1e280;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// `F(u) ~ amplitude·u^s`.
    PowerLaw,
    /// `F(u) ~ amplitude·e^(λu)`.
    Exponential,
    /// `F(u) → amplitude`, a finite limit. Used for reflected antiderivatives.
    Bounded,
    /// No analytic model; improper integrals cannot be decided.
    NumericOnly,
}

/// Analytic model of `F` for `u ≥ cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub kind: TailKind,
    pub amplitude: f64,
    pub exponent_or_rate: f64,
    pub cutoff: f64,
}

impl TailModel {
    pub fn power_law(amplitude: f64, exponent: f64, cutoff: f64) -> Self {
        Self {
            kind: TailKind::PowerLaw,
            amplitude,
            exponent_or_rate: exponent,
            cutoff,
        }
    }

    pub fn exponential(amplitude: f64, rate: f64, cutoff: f64) -> Self {
        Self {
            kind: TailKind::Exponential,
            amplitude,
            exponent_or_rate: rate,
            cutoff,
        }
    }

    pub fn bounded(limit: f64, cutoff: f64) -> Self {
        Self {
            kind: TailKind::Bounded,
            amplitude: limit,
            exponent_or_rate: 0.0,
            cutoff,
        }
    }

    pub fn numeric_only(cutoff: f64) -> Self {
        Self {
            kind: TailKind::NumericOnly,
            amplitude: 1.0,
            exponent_or_rate: 0.0,
            cutoff,
        }
    }

    pub fn validate(&self) -> Result<(), NonlinearityError> {
        let bad = |m: &str| Err(NonlinearityError::InvalidTail(m.to_string()));
        if !self.cutoff.is_finite() {
            return bad("cutoff must be finite");
        }
        match self.kind {
            TailKind::PowerLaw if !(self.exponent_or_rate > 0.0 && self.amplitude > 0.0) => {
                bad("power law needs s > 0 and amplitude > 0")
            }
            TailKind::Exponential if !(self.exponent_or_rate > 0.0 && self.amplitude > 0.0) => {
                bad("exponential tail needs rate > 0 and amplitude > 0")
            }
            TailKind::Bounded if !(self.amplitude > 0.0) => bad("bounded tail needs a positive limit"),
            _ => Ok(()),
        }
    }

    /// Model value at `u`, or `None` without an analytic model.
    pub fn model(&self, u: f64) -> Option<f64> {
        match self.kind {
            TailKind::PowerLaw => Some(self.amplitude * u.powf(self.exponent_or_rate)),
            TailKind::Exponential => Some(self.amplitude * (self.exponent_or_rate * u).exp()),
            TailKind::Bounded => Some(self.amplitude),
            TailKind::NumericOnly => None,
        }
    }

    /// Descriptor for an integrand behaving like `F^(-gamma)·u^beta`.
    /// Algebraic factors are irrelevant to the exponential decay rate.
    pub fn descriptor(&self, gamma: f64, beta: f64) -> Option<TailIntegrand> {
        let c = self.cutoff.max(f64::MIN_POSITIVE);
        match self.kind {
            TailKind::PowerLaw => Some(TailIntegrand::power(self.exponent_or_rate * gamma - beta, c)),
            TailKind::Exponential => Some(TailIntegrand::exponential(self.exponent_or_rate * gamma, self.cutoff)),
            TailKind::Bounded => Some(TailIntegrand::power(-beta, c)),
            TailKind::NumericOnly => None,
        }
    }

    /// Largest `u` with model value at most [`F_CEILING`].
    pub fn ceiling(&self) -> f64 {
        match self.kind {
            TailKind::PowerLaw => (F_CEILING / self.amplitude).powf(1.0 / self.exponent_or_rate),
            TailKind::Exponential => (F_CEILING / self.amplitude).ln() / self.exponent_or_rate,
            TailKind::Bounded | TailKind::NumericOnly => 1e6 * self.cutoff.abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Power { p: f64 },
    Exponential,
    Expression { source: String },
    Closure,
}

struct Inner {
    label: String,
    family: Family,
    f: Evaluator,
    big_f: Evaluator,
    a: f64,
    tail: TailModel,
    spec: QuadratureSpec,
    g: OnceLock<Result<GEvaluator, NonlinearityError>>,
    r0: OnceLock<Result<TailIntegral, NonlinearityError>>,
}

/// A nonlinearity `f` together with `F = ∫_a f`, the positivity threshold
/// `a` and a tail model. Cloning is cheap and clones share caches.
#[derive(Clone)]
pub struct Nonlinearity {
    inner: Arc<Inner>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.inner.label)
            .field("a", &self.inner.a)
            .field("tail", &self.inner.tail)
            .finish()
    }
}

impl Nonlinearity {
    /// Assembles a nonlinearity from evaluators and checks positivity of `f`
    /// beyond `a` and the tail model beyond its cutoff.
    pub fn from_parts(
        label: impl Into<String>,
        family: Family,
        f: Evaluator,
        big_f: Evaluator,
        a: f64,
        tail: TailModel,
    ) -> Result<Self, NonlinearityError> {
        tail.validate()?;
        if !a.is_finite() {
            return Err(NonlinearityError::InvalidParameter("a must be finite".into()));
        }
        let nl = Self::assemble(label.into(), family, f, big_f, a, tail);
        let fa = nl.f(a);
        if !(fa > 0.0) {
            return Err(NonlinearityError::Positivity { witness: a, value: fa });
        }
        nl.check_positivity()?;
        nl.check_tail(TAIL_VALIDATION_TOL)?;
        Ok(nl)
    }

    fn assemble(label: String, family: Family, f: Evaluator, big_f: Evaluator, a: f64, tail: TailModel) -> Self {
        Self {
            inner: Arc::new(Inner {
                label,
                family,
                f,
                big_f,
                a,
                tail,
                spec: QuadratureSpec::default(),
                g: OnceLock::new(),
                r0: OnceLock::new(),
            }),
        }
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn family(&self) -> &Family {
        &self.inner.family
    }

    pub fn a(&self) -> f64 {
        self.inner.a
    }

    pub fn tail(&self) -> &TailModel {
        &self.inner.tail
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.inner.spec
    }

    pub fn f(&self, u: f64) -> f64 {
        (self.inner.f)(u)
    }

    /// `F(u) = ∫_a^u f`.
    pub fn big_f(&self, u: f64) -> f64 {
        (self.inner.big_f)(u)
    }

    pub fn f_evaluator(&self) -> Evaluator {
        self.inner.f.clone()
    }

    pub fn big_f_evaluator(&self) -> Evaluator {
        self.inner.big_f.clone()
    }

    /// `√(2F(u))`, the one-dimensional profile slope.
    pub fn v0(&self, u: f64) -> f64 {
        (2.0 * self.big_f(u)).max(0.0).sqrt()
    }

    /// Largest `u` where `F` stays comfortably representable.
    pub fn u_ceiling(&self) -> f64 {
        self.inner.tail.ceiling().max(self.inner.tail.cutoff)
    }

    /// Typical length scale of `u` near the threshold.
    pub fn scale(&self) -> f64 {
        self.inner.a.abs().max(1.0)
    }

    fn check_positivity(&self) -> Result<(), NonlinearityError> {
        let a = self.inner.a;
        let s = self.scale();
        for k in 0..1000 {
            let t = a + 10f64.powf(-3.0 + 9.0 * k as f64 / 999.0) * s;
            let v = self.f(t);
            if !(v >= 0.0) {
                return Err(NonlinearityError::Positivity { witness: t, value: v });
            }
        }
        Ok(())
    }

    /// Samples `|F/model − 1|` over a stretch beyond the cutoff.
    pub fn check_tail(&self, tol: f64) -> Result<(), NonlinearityError> {
        let tail = self.inner.tail;
        let points: Vec<f64> = match tail.kind {
            TailKind::PowerLaw => {
                let c = tail.cutoff.max(f64::MIN_POSITIVE);
                (0..50).map(|k| c * 10f64.powf(k as f64 / 49.0)).collect()
            }
            TailKind::Exponential => (0..50)
                .map(|k| tail.cutoff + 20.0 * k as f64 / (49.0 * tail.exponent_or_rate))
                .collect(),
            TailKind::Bounded | TailKind::NumericOnly => return Ok(()),
        };
        for u in points {
            let model = tail.model(u).unwrap_or(f64::NAN);
            let dev = (self.big_f(u) / model - 1.0).abs();
            if !(dev <= tol) {
                return Err(NonlinearityError::TailMismatch { at: u, deviation: dev });
            }
        }
        Ok(())
    }

    /// Central-difference check of `F' = f` at the given points.
    pub fn check_derivative(&self, points: &[f64], tol: f64) -> Result<(), NonlinearityError> {
        for &u in points {
            let h = 1e-4 * u.abs().max(1e-2);
            let numeric = (self.big_f(u + h) - self.big_f(u - h)) / (2.0 * h);
            let exact = self.f(u);
            if !((numeric - exact).abs() <= tol * (1.0 + exact.abs())) {
                return Err(NonlinearityError::Derivative { at: u, numeric, exact });
            }
        }
        Ok(())
    }

    /// Cached `G(u) = ∫_a^u √(2F)`.
    pub fn antiderivative_g(&self) -> Result<&GEvaluator, NonlinearityError> {
        self.inner
            .g
            .get_or_init(|| {
                let sqrt2f = {
                    let big_f = self.inner.big_f.clone();
                    Arc::new(move |t: f64| (2.0 * big_f(t)).max(0.0).sqrt()) as Evaluator
                };
                let anti = Antiderivative::new(sqrt2f, self.a(), self.scale(), self.u_ceiling(), self.inner.spec)?;
                Ok(GEvaluator { anti, shift: 0.0, lower: self.a() })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `G(u)` from the cached evaluator.
    pub fn big_g(&self, u: f64) -> f64 {
        self.antiderivative_g().map(|g| g.eval(u)).unwrap_or(f64::NAN)
    }

    fn r0_cache(&self) -> Result<&TailIntegral, NonlinearityError> {
        self.inner
            .r0
            .get_or_init(|| {
                let desc = self.tail().descriptor(0.5, 0.0).ok_or(NonlinearityError::NoAnalyticTail)?;
                if desc.diverges() {
                    return Err(NonlinearityError::NoAnalyticTail);
                }
                let big_f = self.inner.big_f.clone();
                let integrand: Evaluator = Arc::new(move |t: f64| 1.0 / (2.0 * big_f(t)).sqrt());
                let base = self.a() + self.scale() / 64.0;
                Ok(TailIntegral::new(
                    integrand,
                    desc,
                    base,
                    self.scale(),
                    self.u_ceiling(),
                    self.inner.spec,
                )?)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `R₀(u) = ∫_u^∞ dt/√(2F(t))`, defined for `u > a` when Keller–Osserman holds.
    pub fn r0(&self, u: f64) -> Result<f64, NonlinearityError> {
        Ok(self.r0_cache()?.try_eval(u)?)
    }

    /// `u` with `R₀(u) = d`.
    pub fn r0_inverse(&self, d: f64) -> Result<f64, NonlinearityError> {
        let lo = self.a() + self.scale() / 64.0;
        let h = |u: f64| self.r0(u).map(f64::ln).unwrap_or(f64::NAN);
        let x = crate::numerics::invert_monotone(&h, d.ln(), (lo, lo + 2.0 * self.scale()), 1e-14)
            .map_err(|e| NonlinearityError::InvalidParameter(e.to_string()))?;
        Ok(x)
    }
}

/// `u ↦ ∫_lower^u √(2F)`.
#[derive(Debug, Clone)]
pub struct GEvaluator {
    anti: Antiderivative,
    shift: f64,
    lower: f64,
}

impl GEvaluator {
    pub fn eval(&self, u: f64) -> f64 {
        self.anti.eval(u) - self.shift
    }

    pub fn lower_limit(&self) -> f64 {
        self.lower
    }

    /// Same antiderivative based at `lower` instead of `a`.
    pub fn with_lower_limit(&self, lower: f64) -> Self {
        Self {
            anti: self.anti.clone(),
            shift: self.anti.eval(lower),
            lower,
        }
    }
}

/// Cached evaluator of `G(u) = ∫_a^u √(2F)`.
pub fn antiderivative_g(nl: &Nonlinearity) -> Result<GEvaluator, NonlinearityError> {
    nl.antiderivative_g().cloned()
}

/// `f(u) = u^p` for `u > 0` (zero below), `F = u^(p+1)/(p+1)`, `a = 0`.
pub fn make_power(p: f64) -> Result<Nonlinearity, NonlinearityError> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(NonlinearityError::InvalidParameter(format!("power p = {p} must exceed 1")));
    }
    let f: Evaluator = Arc::new(move |u: f64| if u > 0.0 { u.powf(p) } else { 0.0 });
    let big_f: Evaluator = Arc::new(move |u: f64| if u > 0.0 { u.powf(p + 1.0) / (p + 1.0) } else { 0.0 });
    let tail = TailModel::power_law(1.0 / (p + 1.0), p + 1.0, 1.0);
    tail.validate()?;
    // f vanishes at the threshold itself, so only the tail is validated.
    let nl = Nonlinearity::assemble(format!("u^{p}"), Family::Power { p }, f, big_f, 0.0, tail);
    nl.check_tail(1e-12)?;
    Ok(nl)
}

/// `f(u) = e^u` with `F = e^u`.
pub fn make_exponential() -> Nonlinearity {
    let f: Evaluator = Arc::new(f64::exp);
    let big_f: Evaluator = Arc::new(f64::exp);
    Nonlinearity::assemble(
        "exp(u)".into(),
        Family::Exponential,
        f,
        big_f,
        0.0,
        TailModel::exponential(1.0, 1.0, 0.0),
    )
}

/// Nonlinearity from an expression in `u`, with `F` built by cached
/// quadrature from `a`.
pub fn make_custom(expr: &str, a: f64, tail: TailModel) -> Result<Nonlinearity, NonlinearityError> {
    let parsed = Arc::new(Expr::parse(expr)?);
    tail.validate()?;
    let f: Evaluator = {
        let e = parsed.clone();
        Arc::new(move |u| e.eval(u))
    };
    // Nodes cover the validation range densely enough for oscillating f;
    // beyond it F is integrated from the last node.
    let scale = a.abs().max(1.0);
    let top = tail.cutoff.abs().max(scale) * 10.0;
    let anti = Antiderivative::with_max_width(f.clone(), a, scale, top, 4.0 * scale, QuadratureSpec::default())?;
    let big_f: Evaluator = Arc::new(move |u| anti.eval(u));
    Nonlinearity::from_parts(
        expr,
        Family::Expression { source: expr.to_string() },
        f,
        big_f,
        a,
        tail,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KoVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KoReport {
    pub verdict: KoVerdict,
    /// `∫_L^∞ dt/√F` from `L = max(cutoff, a + 1)`; `None` when undecidable.
    pub tail_integral: Option<Integral>,
    pub lower_limit: f64,
}

impl KoReport {
    pub fn holds(&self) -> bool {
        self.verdict == KoVerdict::Holds
    }
}

/// Convergence of `∫^∞ dt/√F(t)`.
pub fn keller_osserman(nl: &Nonlinearity) -> KoReport {
    let tail = nl.tail();
    let lower = tail.cutoff.max(nl.a() + 1.0);
    let Some(desc) = tail.descriptor(0.5, 0.0) else {
        return KoReport {
            verdict: KoVerdict::Inconclusive,
            tail_integral: None,
            lower_limit: lower,
        };
    };
    let g = |t: f64| 1.0 / nl.big_f(t).sqrt();
    match integrate_tail(&g, lower, &desc, nl.spec()) {
        Ok(value) => KoReport {
            verdict: if value.is_infinite() { KoVerdict::Fails } else { KoVerdict::Holds },
            tail_integral: Some(value),
            lower_limit: lower,
        },
        Err(_) => KoReport {
            verdict: KoVerdict::Inconclusive,
            tail_integral: None,
            lower_limit: lower,
        },
    }
}

/// Divergence of `∫^∞ dt/√G(t)` with `G' (t) = f(−t)`, `G(0) = 0`.
///
/// The verdict follows from comparison with `reflected_tail`, which is first
/// checked against `G` by sampling: a bound from above is required to
/// conclude divergence, a bound from below to conclude convergence.
pub fn ko2_check(nl: &Nonlinearity, reflected_tail: &TailModel) -> KoVerdict {
    if reflected_tail.validate().is_err() {
        return KoVerdict::Inconclusive;
    }
    let spec = nl.spec();
    let refl = |s: f64| nl.f(-s);
    let g_at = |t: f64| match integrate_finite(&refl, 0.0, t, spec) {
        Ok(v) => v,
        Err(QuadError::NonFinite { .. }) | Err(QuadError::Budget { .. }) => f64::INFINITY,
        Err(_) => f64::NAN,
    };
    let c = reflected_tail.cutoff.max(1.0);
    let (diverges, points): (bool, Vec<f64>) = match reflected_tail.kind {
        TailKind::PowerLaw => (
            reflected_tail.exponent_or_rate <= 2.0,
            (0..8).map(|j| c * 2f64.powi(j)).collect(),
        ),
        TailKind::Bounded => (true, (0..8).map(|j| c * 2f64.powi(j)).collect()),
        TailKind::Exponential => (
            false,
            (0..6).map(|j| c + j as f64 / reflected_tail.exponent_or_rate).collect(),
        ),
        TailKind::NumericOnly => return KoVerdict::Inconclusive,
    };
    for t in points {
        let g = g_at(t);
        let model = reflected_tail.model(t).unwrap_or(f64::NAN);
        let consistent = if diverges {
            g.is_finite() && g <= 2.0 * model
        } else {
            g >= 0.5 * model
        };
        if !consistent {
            return KoVerdict::Inconclusive;
        }
    }
    if diverges {
        KoVerdict::Holds
    } else {
        KoVerdict::Fails
    }
}
