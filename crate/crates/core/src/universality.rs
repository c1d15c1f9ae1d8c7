//! Whether a single term `u₀(r)` captures the blow-up up to `o(1)`.
//!
//! The criterion function is
//! `Φ(u) = √(2F(u))·∫_u^∞ G(t)/(2F(t))^(3/2) dt` with `G = ∫_L^u √(2F)`.
//! `Φ → 0` gives a universal rate; `Φ` bounded below rules it out.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::nonlinearity::{keller_osserman, Nonlinearity, NonlinearityError, TailKind};
use crate::numerics::{integrate_finite, Evaluator, QuadError, TailIntegral};
use crate::phase_plane::RadialSolution;
use crate::picard::{apply_n, initial_iterate, PicardConfig, PicardError, VIterate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UniversalityError {
    #[error("Keller-Osserman condition does not hold for {0}")]
    KoFails(String),
    #[error("no analytic tail model for {0}; the outer integral cannot be evaluated")]
    NoTail(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Picard(#[from] PicardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Universal,
    NonUniversal,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Universal => "Universal",
            Verdict::NonUniversal => "NonUniversal",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Cached `Φ` for one nonlinearity and lower limit.
#[derive(Clone)]
pub struct Phi {
    nl: Nonlinearity,
    lower: f64,
    tail: TailIntegral,
    g: Evaluator,
}

impl std::fmt::Debug for Phi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Phi")
            .field("nonlinearity", &self.nl.label())
            .field("lower", &self.lower)
            .finish()
    }
}

impl Phi {
    /// `G` based at `max(a, 0)`.
    pub fn new(nl: &Nonlinearity) -> Result<Self, UniversalityError> {
        Self::with_lower_limit(nl, nl.a().max(0.0))
    }

    pub fn with_lower_limit(nl: &Nonlinearity, lower: f64) -> Result<Self, UniversalityError> {
        if !keller_osserman(nl).holds() {
            return Err(UniversalityError::KoFails(nl.label().to_string()));
        }
        let desc = nl
            .tail()
            .descriptor(1.0, 1.0)
            .ok_or_else(|| UniversalityError::NoTail(nl.label().to_string()))?;
        let gev = nl.antiderivative_g()?.with_lower_limit(lower);
        let g: Evaluator = Arc::new(move |t| gev.eval(t));
        let big_f = nl.big_f_evaluator();
        let integrand: Evaluator = {
            let g = g.clone();
            // Divided in stages so that (2F)^(3/2) never overflows.
            Arc::new(move |t| {
                let s = (2.0 * big_f(t)).sqrt();
                g(t) / s / s / s
            })
        };
        let base = lower.max(nl.a() + nl.scale() / 64.0);
        let tail = TailIntegral::new(integrand, desc, base, nl.scale(), nl.u_ceiling(), *nl.spec())?;
        Ok(Self { nl: nl.clone(), lower, tail, g })
    }

    pub fn lower_limit(&self) -> f64 {
        self.lower
    }

    /// `G(u) = ∫_L^u √(2F)`.
    pub fn big_g(&self, u: f64) -> f64 {
        (self.g)(u)
    }

    /// `∫_u^∞ G/(2F)^(3/2)`.
    pub fn outer(&self, u: f64) -> Result<f64, UniversalityError> {
        Ok(self.tail.try_eval(u)?)
    }

    /// `∫_lo^hi G/(2F)^(3/2)`.
    pub fn outer_between(&self, lo: f64, hi: f64) -> Result<f64, UniversalityError> {
        let big_f = self.nl.big_f_evaluator();
        let h = |t: f64| {
            let s = (2.0 * big_f(t)).sqrt();
            (self.g)(t) / s / s / s
        };
        Ok(integrate_finite(&h, lo, hi, self.nl.spec())?)
    }

    pub fn eval(&self, u: f64) -> Result<f64, UniversalityError> {
        Ok((2.0 * self.nl.big_f(u)).sqrt() * self.outer(u)?)
    }
}

/// `Φ(u)` with `G` based at `lower_limit`.
pub fn phi(nl: &Nonlinearity, u: f64, lower_limit: f64) -> Result<f64, UniversalityError> {
    Phi::with_lower_limit(nl, lower_limit)?.eval(u)
}

/// Limit of `Φ` implied by the tail model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiLimit {
    Zero,
    Positive(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailAnalysis {
    /// `Φ ~ c·u^e` for power tails (`e = 2 − s/2`); `None` for exponential.
    pub exponent: Option<f64>,
    pub limit: PhiLimit,
}

/// Closed-form behaviour of `Φ` for `F ~ A·u^s` or `F ~ A·e^(λu)`.
///
/// For `F = A·u^s` exactly, `Φ(u) = u^(2−s/2) / ((s−2)(s/2+1)√(2A))`.
pub fn tail_analysis(nl: &Nonlinearity) -> Option<TailAnalysis> {
    let t = nl.tail();
    match t.kind {
        TailKind::PowerLaw => {
            let s = t.exponent_or_rate;
            let e = 2.0 - 0.5 * s;
            let limit = if (s - 4.0).abs() <= 1e-12 {
                PhiLimit::Positive(1.0 / ((s - 2.0) * (0.5 * s + 1.0) * (2.0 * t.amplitude).sqrt()))
            } else if s > 4.0 {
                PhiLimit::Zero
            } else {
                PhiLimit::Infinite
            };
            Some(TailAnalysis { exponent: Some(e), limit })
        }
        TailKind::Exponential => Some(TailAnalysis { exponent: None, limit: PhiLimit::Zero }),
        TailKind::Bounded | TailKind::NumericOnly => None,
    }
}

/// Verdict from samples alone: toward zero means the last sample is below a
/// tenth of the first and the final decade is non-increasing; bounded below
/// means the final decade stays above half the median.
pub fn sampled_verdict(samples: &[(f64, f64)]) -> Verdict {
    if samples.len() < 3 {
        return Verdict::Inconclusive;
    }
    let (u_first, first) = samples[0];
    let (u_last, last) = samples[samples.len() - 1];
    if !(u_first > 0.0 && u_last >= 100.0 * u_first) {
        return Verdict::Inconclusive;
    }
    let decade: Vec<f64> = samples
        .iter()
        .filter(|(u, _)| *u >= u_last / 10.0)
        .map(|s| s.1)
        .collect();
    let decreasing = decade.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    if last < 0.1 * first && decreasing {
        return Verdict::Universal;
    }
    let mut sorted: Vec<f64> = samples.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let min_decade = decade.iter().copied().fold(f64::INFINITY, f64::min);
    if median > 0.0 && min_decade > 0.5 * median {
        return Verdict::NonUniversal;
    }
    Verdict::Inconclusive
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversalityReport {
    pub label: String,
    /// `(u, Φ(u))` at `u = U0·2^j`.
    pub samples: Vec<(f64, f64)>,
    pub verdict: Verdict,
    pub sampled: Verdict,
    pub tail_analysis: Option<TailAnalysis>,
    /// `(r, u₁(r) − u₀(r))`, filled by [`UniversalityReport::with_gap_table`].
    pub gap_table: Vec<(f64, f64)>,
}

impl UniversalityReport {
    pub fn with_gap_table(mut self, gap: &SecondTermGap) -> Self {
        self.gap_table = gap.rows.iter().map(|r| (r.r, r.gap)).collect();
        self
    }

    /// Writes `u,phi` rows at 17 significant digits.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "u,phi")?;
        for (u, p) in &self.samples {
            writeln!(w, "{u:.16e},{p:.16e}")?;
        }
        Ok(())
    }
}

/// Samples `Φ` on `u = U0·2^j` up to the representable range and combines
/// the sampled verdict with the closed-form one when the tail is analytic.
pub fn classify(nl: &Nonlinearity) -> Result<UniversalityReport, UniversalityError> {
    let phi = Phi::new(nl)?;
    let u0 = nl.tail().cutoff.max(nl.a() + nl.scale());
    let top = nl.u_ceiling();
    let mut samples = Vec::new();
    let mut u = u0;
    // Stay well inside the range where F and its square root are representable.
    while u <= top && nl.big_f(u) <= 1e250 && samples.len() < 400 {
        let v = phi.eval(u)?;
        if !(v.is_finite() && v > 0.0) {
            break;
        }
        samples.push((u, v));
        u *= 2.0;
    }
    let sampled = sampled_verdict(&samples);
    let analysis = tail_analysis(nl);
    let verdict = match (sampled, analysis.map(|a| a.limit)) {
        (Verdict::Universal, None | Some(PhiLimit::Zero)) => Verdict::Universal,
        (Verdict::NonUniversal, None | Some(PhiLimit::Positive(_)) | Some(PhiLimit::Infinite)) => {
            Verdict::NonUniversal
        }
        _ => Verdict::Inconclusive,
    };
    Ok(UniversalityReport {
        label: nl.label().to_string(),
        samples,
        verdict,
        sampled,
        tail_analysis: analysis,
        gap_table: Vec::new(),
    })
}

/// `Φ(u_k(r))` along a profile iterate, the weakened form of the criterion.
pub fn phi_along(phi: &Phi, vk: &VIterate, radii: &[f64]) -> Result<Vec<(f64, f64)>, UniversalityError> {
    radii
        .iter()
        .map(|&r| {
            let u = vk.invert(r)?;
            Ok((r, phi.eval(u)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondGapRow {
    pub r: f64,
    pub u0: f64,
    pub u1: f64,
    pub gap: f64,
    /// `(u₁ − u₀)/√(2F(u₀))`.
    pub upper_lhs: f64,
    /// `(N−1)∫_{u₁}^∞ G/(2F)^(3/2)`.
    pub upper_rhs: f64,
    /// `∫_{u₀}^{u₁} G/(2F)^(3/2)`.
    pub lower_lhs: f64,
    /// `(u₁² − u₀²)/(4F(u₀))`, which bounds `∫_{u₀}^{u₁} t/(2F)` and hence
    /// `lower_lhs`.
    pub lower_rhs: f64,
    /// `(u₁ − u₀)²/(4F(u₀))`. Smaller than `lower_rhs` by the factor
    /// `(u₁ − u₀)/(u₁ + u₀)` and not a bound; kept for comparison.
    pub lower_rhs_squared_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondTermGap {
    pub rows: Vec<SecondGapRow>,
    /// Log-log slope of the gap against `1 − r` over the last two rows.
    pub tail_slope: f64,
    /// Whether the gap stays away from zero as `r → 1`: positive at the
    /// smallest `1 − r` and not decaying like a positive power of it.
    pub liminf_positive: bool,
}

impl SecondTermGap {
    /// Writes `r,u0,u1,gap,upper_lhs,upper_rhs,lower_lhs,lower_rhs,lower_rhs_squared_gap`.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "r,u0,u1,gap,upper_lhs,upper_rhs,lower_lhs,lower_rhs,lower_rhs_squared_gap")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.r,
                r.u0,
                r.u1,
                r.gap,
                r.upper_lhs,
                r.upper_rhs,
                r.lower_lhs,
                r.lower_rhs,
                r.lower_rhs_squared_gap
            )?;
        }
        Ok(())
    }
}

/// `u₁(r) − u₀(r)` from the first two profile iterates, with both sides of
/// the inequalities that force it to stay positive when `Φ` does not vanish.
pub fn second_term_gap(
    nl: &Nonlinearity,
    dim: usize,
    radii: &[f64],
    cfg: &PicardConfig,
) -> Result<SecondTermGap, UniversalityError> {
    let phi = Phi::new(nl)?;
    let v0 = initial_iterate(nl, dim, cfg)?;
    let v1 = apply_n(&v0)?;
    let k = dim as f64 - 1.0;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let u0 = v0.invert(r)?;
        let u1 = v1.invert(r)?;
        let gap = u1 - u0;
        let f0 = nl.big_f(u0);
        rows.push(SecondGapRow {
            r,
            u0,
            u1,
            gap,
            upper_lhs: gap / (2.0 * f0).sqrt(),
            upper_rhs: k * phi.outer(u1)?,
            lower_lhs: phi.outer_between(u0, u1)?,
            lower_rhs: gap * (u0 + u1) / (4.0 * f0),
            lower_rhs_squared_gap: gap * gap / (4.0 * f0),
        });
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.r.total_cmp(&a.r));
    let tail_slope = match sorted.as_slice() {
        [.., a, b] if a.gap > 0.0 && b.gap > 0.0 => (b.gap / a.gap).ln() / ((1.0 - b.r) / (1.0 - a.r)).ln(),
        _ => f64::NAN,
    };
    let liminf_positive = dim > 1 && sorted.last().is_some_and(|row| row.gap > 0.0) && tail_slope < 0.1;
    Ok(SecondTermGap { rows, tail_slope, liminf_positive })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneTermRow {
    pub r: f64,
    pub u: f64,
    pub u0: f64,
    pub gap: f64,
    /// `Φ(u)`.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneTermTable {
    pub rows: Vec<OneTermRow>,
    /// Largest `|u − u₀|/Φ(u)`: the constant that makes the bound hold.
    pub fitted_c: f64,
    /// Ratio of largest to smallest `|u − u₀|/Φ(u)`.
    pub c_spread: f64,
}

impl OneTermTable {
    /// Writes `r,u,u0,gap,bound,ratio`.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "r,u,u0,gap,bound,ratio")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.r, r.u, r.u0, r.gap, r.bound, r.ratio
            )?;
        }
        Ok(())
    }
}

/// `u(r) − u₀(r)` for a computed solution against `Φ(u(r))`, where
/// `∫_{u₀}^∞ dt/√(2F) = 1 − r`.
pub fn verify_one_term(sol: &RadialSolution, radii: &[f64]) -> Result<OneTermTable, UniversalityError> {
    let nl = sol.path().nonlinearity().clone();
    let phi = Phi::new(&nl)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0 && r < 1.0) {
            return Err(UniversalityError::InvalidInput(format!("r = {r} outside (0, 1)")));
        }
        let u = sol
            .u_at(r)
            .map_err(|e| UniversalityError::InvalidInput(e.to_string()))?;
        let u0 = nl.r0_inverse(1.0 - r)?;
        let bound = phi.eval(u)?;
        let gap = u - u0;
        rows.push(OneTermRow { r, u, u0, gap, bound, ratio: gap.abs() / bound });
    }
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    Ok(OneTermTable { rows, fitted_c: hi, c_spread: hi / lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_exponential, make_power};

    #[test]
    fn closed_form_phi() {
        for s in [3.0, 4.0, 6.0] {
            let nl = make_power(s - 1.0).unwrap();
            let a = 1.0 / s;
            let phi = Phi::new(&nl).unwrap();
            for u in [2.0f64, 50.0, 1e4] {
                let exact = u.powf(2.0 - s / 2.0) / ((s - 2.0) * (s / 2.0 + 1.0) * (2.0 * a).sqrt());
                let got = phi.eval(u).unwrap();
                assert!((got / exact - 1.0).abs() < 1e-6, "s = {s}, u = {u}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn power_and_exponential_verdicts() {
        let verdicts: Vec<Verdict> = [2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|&p| classify(&make_power(p).unwrap()).unwrap().verdict)
            .collect();
        use Verdict::*;
        assert_eq!(verdicts, vec![NonUniversal, NonUniversal, Universal, Universal]);
        assert_eq!(classify(&make_exponential()).unwrap().verdict, Universal);
    }
}
