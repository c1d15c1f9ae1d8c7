//! Boundary expansions: exact coefficients for `f(u) = u^p` and the implicit
//! three-term formula for general `F`.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::nonlinearity::{keller_osserman, Nonlinearity, NonlinearityError};
use crate::numerics::{invert_monotone, Antiderivative, Evaluator, QuadError, TailIntegral};
use crate::series::{PuiseuxSeries, SeriesError, Variable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpansionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "exponent collision at coefficient {index}: the free energy constant enters the lattice there; \
         request at most {max_order}"
    )]
    Resonance { index: usize, max_order: usize },
    #[error("Keller-Osserman condition does not hold for {0}")]
    KoFails(String),
    #[error("{which} diverges: {reason}")]
    Divergent { which: &'static str, reason: String },
    #[error("target 1 - r = {target} outside the table range [{lo}, {hi}]")]
    OutOfRange { target: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// `floor(2/(p−1)) + 1`, the number of terms of `u(d)` that do not vanish at
/// the boundary.
pub fn singular_term_count(p: f64) -> Result<usize, ExpansionError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(ExpansionError::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    Ok(singular_index(p) + 1)
}

fn singular_index(p: f64) -> usize {
    let m = 2.0 / (p - 1.0);
    // Guard exact integers against representation error in 2/(p−1).
    let r = m.round();
    if (m - r).abs() < 1e-12 * r.max(1.0) {
        r as usize
    } else {
        m.floor() as usize
    }
}

/// Index at which the lattice `−m + k` meets the exponent `m + 2` of the
/// free homogeneous mode, when `2m` is an integer.
pub fn resonance_index(p: f64) -> Option<usize> {
    let two_m = 4.0 / (p - 1.0);
    let r = two_m.round();
    ((two_m - r).abs() < 1e-12 * r.max(1.0)).then_some(r as usize + 2)
}

/// `u(d) = d^(−m)·Σ a_k d^k` for `Δu = u^p`, `m = 2/(p−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawExpansion {
    pub p: f64,
    pub dim: usize,
    pub m: f64,
    /// Coefficients `a_0, a_1, …` for `f(u) = u^p`.
    pub coeffs: Vec<f64>,
    /// The recursion runs for `F = u^(2q)/2`, `2q − 1 = p`, i.e. `f = q·u^p`;
    /// its coefficients are multiplied by `q^(1/(p−1))` on output.
    pub conversion_factor: f64,
    /// `floor(m)`: indices `0..=singular_index` carry non-positive exponents.
    pub singular_index: usize,
    pub resonance: Option<usize>,
}

impl PowerLawExpansion {
    /// Exponent of `d` in the `k`-th term.
    pub fn exponent(&self, k: usize) -> f64 {
        k as f64 - self.m
    }

    /// `u(d)` as a series in `d`.
    pub fn series(&self) -> Result<PuiseuxSeries, ExpansionError> {
        Ok(PuiseuxSeries::new(-self.m, 1.0, self.coeffs.clone(), Variable::D)?)
    }

    /// Partial sum at distance `d`.
    pub fn eval(&self, d: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * d.powf(self.exponent(k)))
            .sum()
    }

    /// Writes `p,N,k,exponent,a_k` rows at 17 significant digits.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "p,N,k,exponent,a_k")?;
        for (k, a) in self.coeffs.iter().enumerate() {
            writeln!(w, "{},{},{},{:.16e},{:.16e}", self.p, self.dim, k, self.exponent(k), a)?;
        }
        Ok(())
    }
}

/// Closed-form leading coefficient `(2(p+1)/(p−1)²)^(1/(p−1))`.
pub fn leading_coefficient(p: f64) -> f64 {
    (2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).powf(1.0 / (p - 1.0))
}

/// Coefficients `a_0..=a_order` (at least through the last singular term)
/// from the profile recursion in `x = 1/u`.
///
/// Each pass maps `v ↦ √(u^(2q) − 2(N−1)∫^u v/(1 − ∫_t^∞ ds/v) dt)` on
/// truncated series and fixes one more coefficient; `∫_u^∞ dt/v = d` is then
/// reverted to give `u(d)`.
pub fn power_law_expansion(p: f64, dim: usize, order: usize) -> Result<PowerLawExpansion, ExpansionError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(ExpansionError::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    if dim == 0 {
        return Err(ExpansionError::InvalidParameter("dimension must be at least 1".into()));
    }
    let k_sing = singular_index(p);
    let order = order.max(k_sing);
    let resonance = resonance_index(p);
    if let Some(index) = resonance {
        if order >= index {
            return Err(ExpansionError::Resonance { index, max_order: index - 1 });
        }
    }
    let q = 0.5 * (p + 1.0);
    let delta = q - 1.0;
    let n = order + 1;
    let x = Variable::UInverse;
    let two_f = PuiseuxSeries::monomial(1.0, -2.0 * q, delta, n + 1, x)?;
    let one = PuiseuxSeries::monomial(1.0, 0.0, delta, n + 1, x)?;
    let nm1 = dim as f64 - 1.0;
    let mut v = PuiseuxSeries::monomial(1.0, -q, delta, n, x)?;
    for _ in 0..=n {
        let tail = v.recip()?.integrate_tail()?;
        let r = one.sub(&tail)?;
        // Integrand term j feeds coefficient j + 1 of the next iterate.
        let q_int = v.mul(&r.recip()?)?.truncate(n - 1).integrate_indefinite()?;
        let next = two_f.sub(&q_int.scale(2.0 * nm1))?.sqrt()?.truncate(n);
        if next == v {
            break;
        }
        v = next;
    }
    let d_of_y = {
        let s = v.recip()?.integrate_tail()?;
        // ∫_u^∞ dt/v = Σ s_k y^(k+1) with y = u^(−(q−1)).
        PuiseuxSeries::new(1.0, 1.0, s.coeffs().to_vec(), Variable::D)?
    };
    let y_of_d = d_of_y.revert()?;
    let unit = PuiseuxSeries::new(0.0, 1.0, y_of_d.coeffs().to_vec(), Variable::D)?;
    let factor = q.powf(1.0 / (p - 1.0));
    let coeffs = unit.pow(-1.0 / delta)?.coeffs().iter().map(|a| a * factor).collect();
    Ok(PowerLawExpansion {
        p,
        dim,
        m: 2.0 / (p - 1.0),
        coeffs,
        conversion_factor: factor,
        singular_index: k_sing,
        resonance,
    })
}

/// Third-order term of the implicit relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R2Form {
    /// `(N−1)∫_U^∞ [H(u) + (3/2)(N−1)G²/(2F)]/(2F)^(3/2)` with
    /// `H = ∫^u (√(2F)·R₀ − (N−1)G/√(2F))`, from expanding `1/v₂` to second
    /// order. Positive for power laws.
    #[default]
    Derived,
    /// `(N−1)∫_U^∞ [−H(u) + (5/4)(N−1)G²/(2F)]/(2F)^(3/2)` with
    /// `H = ∫^u ((N−1)G/√(2F) + √(2F)·R₀)`. Its magnitude differs from the
    /// true third term by a constant factor (about 1.08 for `u²`, `N = 3`)
    /// and its sign is reversed; kept for comparison.
    Uncorrected,
}

/// `R₀, R₁, R₂` of the implicit relation
/// `1 − r = R₀(u) + R₁(u) + R₂(u)(1 + o(1))` at `u = u₂(r)`.
#[derive(Clone)]
pub struct ThreeTerm {
    nl: Nonlinearity,
    dim: usize,
    lower: f64,
    form: R2Form,
    r1: Option<TailIntegral>,
    r2: Option<TailIntegral>,
}

impl std::fmt::Debug for ThreeTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThreeTerm")
            .field("nonlinearity", &self.nl.label())
            .field("dim", &self.dim)
            .field("lower", &self.lower)
            .field("form", &self.form)
            .finish()
    }
}

impl ThreeTerm {
    /// Inner antiderivatives start at `lower` (normally `a`).
    pub fn new(nl: &Nonlinearity, dim: usize, lower: f64) -> Result<Self, ExpansionError> {
        Self::with_form(nl, dim, lower, R2Form::Derived)
    }

    pub fn with_form(nl: &Nonlinearity, dim: usize, lower: f64, form: R2Form) -> Result<Self, ExpansionError> {
        if dim == 0 {
            return Err(ExpansionError::InvalidParameter("dimension must be at least 1".into()));
        }
        if !keller_osserman(nl).holds() {
            return Err(ExpansionError::KoFails(nl.label().to_string()));
        }
        if dim == 1 {
            return Ok(Self { nl: nl.clone(), dim, lower, form, r1: None, r2: None });
        }
        let k = dim as f64 - 1.0;
        let g = nl.antiderivative_g()?.with_lower_limit(lower);
        let big_f = nl.big_f_evaluator();
        let base = lower.max(nl.a() + nl.scale() / 64.0);
        let scale = nl.scale();
        let top = nl.u_ceiling();
        let spec = *nl.spec();
        let tail = *nl.tail();
        let desc = |gamma: f64, beta: f64| {
            tail.descriptor(gamma, beta).ok_or_else(|| ExpansionError::Divergent {
                which: "three-term tail",
                reason: "no analytic tail model".into(),
            })
        };
        let r1_integrand: Evaluator = {
            let (g, big_f) = (g.clone(), big_f.clone());
            // Divided in stages so that (2F)^(3/2) never overflows.
            Arc::new(move |t| {
                let s = (2.0 * big_f(t)).sqrt();
                g.eval(t) / s / s / s
            })
        };
        let r1 = TailIntegral::new(r1_integrand, desc(1.0, 1.0)?, base, scale, top, spec)?;
        let h_integrand: Evaluator = {
            let (g, big_f, nl) = (g.clone(), big_f.clone(), nl.clone());
            Arc::new(move |t| {
                let two_f = 2.0 * big_f(t);
                if two_f <= 0.0 {
                    return 0.0;
                }
                let s = two_f.sqrt();
                let (a, b) = (k * g.eval(t) / s, s * nl.r0(t).unwrap_or(f64::NAN));
                let h = match form {
                    R2Form::Derived => b - a,
                    R2Form::Uncorrected => a + b,
                };
                // For u^5, N = 3 the two terms cancel identically.
                if h.abs() <= 64.0 * f64::EPSILON * a.abs().max(b.abs()) {
                    0.0
                } else {
                    h
                }
            })
        };
        let h = Antiderivative::new(h_integrand, lower, scale, top, spec)?;
        let r2_integrand: Evaluator = {
            let (g, big_f) = (g.clone(), big_f.clone());
            Arc::new(move |t| {
                let s = (2.0 * big_f(t)).sqrt();
                let rho = g.eval(t) / s;
                let (sign, c) = match form {
                    R2Form::Derived => (1.0, 1.5),
                    R2Form::Uncorrected => (-1.0, 1.25),
                };
                (sign * h.eval(t) / s + c * k * rho * rho / s) / s / s
            })
        };
        let r2 = TailIntegral::new(r2_integrand, desc(1.5, 2.0)?, base, scale, top, spec)?;
        Ok(Self { nl: nl.clone(), dim, lower, form, r1: Some(r1), r2: Some(r2) })
    }

    pub fn lower_limit(&self) -> f64 {
        self.lower
    }

    pub fn form(&self) -> R2Form {
        self.form
    }

    pub fn r0(&self, u: f64) -> Result<f64, ExpansionError> {
        Ok(self.nl.r0(u)?)
    }

    pub fn r1(&self, u: f64) -> Result<f64, ExpansionError> {
        match &self.r1 {
            None => Ok(0.0),
            Some(t) => Ok((self.dim as f64 - 1.0) * t.try_eval(u)?),
        }
    }

    pub fn r2(&self, u: f64) -> Result<f64, ExpansionError> {
        match &self.r2 {
            None => Ok(0.0),
            Some(t) => Ok((self.dim as f64 - 1.0) * t.try_eval(u)?),
        }
    }

    /// `R₀ + R₁ + R₂` at `u`.
    pub fn total(&self, u: f64) -> Result<f64, ExpansionError> {
        Ok(self.r0(u)? + self.r1(u)? + self.r2(u)?)
    }
}

/// Tabulated `R₀, R₁, R₂` on a grid of `U`.
#[derive(Debug, Clone)]
pub struct ThreeTermTable {
    pub terms: ThreeTerm,
    pub u: Vec<f64>,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl ThreeTermTable {
    /// Writes `U,R0,R1,R2` rows at 17 significant digits.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "U,R0,R1,R2")?;
        for i in 0..self.u.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.u[i], self.r0[i], self.r1[i], self.r2[i]
            )?;
        }
        Ok(())
    }
}

/// `R₀, R₁, R₂` at each point of `grid` with inner integrals based at `a`.
pub fn three_term_table(nl: &Nonlinearity, dim: usize, grid: &[f64]) -> Result<ThreeTermTable, ExpansionError> {
    three_term_table_from(nl, dim, grid, nl.a(), R2Form::Derived)
}

/// Like [`three_term_table`] with an explicit lower limit and `R₂` form.
pub fn three_term_table_from(
    nl: &Nonlinearity,
    dim: usize,
    grid: &[f64],
    lower: f64,
    form: R2Form,
) -> Result<ThreeTermTable, ExpansionError> {
    let terms = ThreeTerm::with_form(nl, dim, lower, form)?;
    let mut table = ThreeTermTable {
        terms,
        u: grid.to_vec(),
        r0: Vec::with_capacity(grid.len()),
        r1: Vec::with_capacity(grid.len()),
        r2: Vec::with_capacity(grid.len()),
    };
    for &u in grid {
        let (r0, r1, r2) = (table.terms.r0(u)?, table.terms.r1(u)?, table.terms.r2(u)?);
        for (which, v) in [("R0", r0), ("R1", r1), ("R2", r2)] {
            if !v.is_finite() {
                return Err(ExpansionError::Divergent { which, reason: format!("value {v} at U = {u}") });
            }
        }
        table.r0.push(r0);
        table.r1.push(r1);
        table.r2.push(r2);
    }
    Ok(table)
}

/// Solves `R₀(U) + R₁(U) + R₂(U) = 1 − r` within the table range.
pub fn invert_three_term(table: &ThreeTermTable, r: f64) -> Result<f64, ExpansionError> {
    let n = table.u.len();
    if n < 2 {
        return Err(ExpansionError::InvalidParameter("table needs at least two points".into()));
    }
    let total = |i: usize| table.r0[i] + table.r1[i] + table.r2[i];
    let (hi, lo) = (total(0), total(n - 1));
    let target = 1.0 - r;
    if !(target >= lo && target <= hi) {
        return Err(ExpansionError::OutOfRange { target, lo, hi });
    }
    let h = |u: f64| table.terms.total(u).map(f64::ln).unwrap_or(f64::NAN);
    let j = (1..n).find(|&i| total(i) <= target).unwrap_or(n - 1);
    invert_monotone(&h, target.ln(), (table.u[j - 1], table.u[j]), 1e-15)
        .map_err(|e| ExpansionError::InvalidParameter(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::make_power;

    #[test]
    fn singular_counts() {
        assert_eq!(singular_term_count(2.0).unwrap(), 3);
        assert_eq!(singular_term_count(3.0).unwrap(), 2);
        assert_eq!(singular_term_count(5.0).unwrap(), 1);
        assert_eq!(singular_term_count(100.0).unwrap(), 1);
        assert!(singular_term_count(1.0).is_err());
    }

    #[test]
    fn quadratic_coefficients() {
        let e = power_law_expansion(2.0, 3, 2).unwrap();
        assert!((e.coeffs[0] - 6.0).abs() < 1e-12);
        assert!((e.coeffs[1] - 2.4).abs() < 1e-12);
        let flat = power_law_expansion(2.0, 1, 2).unwrap();
        assert!(flat.coeffs[1].abs() < 1e-14 && flat.coeffs[2].abs() < 1e-14);
    }

    #[test]
    fn resonance_is_reported() {
        // 2m = 4 for p = 2, so the collision sits at index 6.
        assert_eq!(resonance_index(2.0), Some(6));
        assert!(matches!(
            power_law_expansion(2.0, 3, 6),
            Err(ExpansionError::Resonance { index: 6, .. })
        ));
        assert_eq!(resonance_index(2.5), None);
    }

    #[test]
    fn three_term_flat_case() {
        let nl = make_power(2.0).unwrap();
        let t = three_term_table(&nl, 1, &[10.0, 100.0]).unwrap();
        assert_eq!((t.r1[0], t.r2[1]), (0.0, 0.0));
        let u = invert_three_term(&t, 1.0 - t.r0[0] * 0.5).unwrap();
        assert!((nl.r0(u).unwrap() / (0.5 * t.r0[0]) - 1.0).abs() < 1e-12);
        assert!(invert_three_term(&t, 0.0).is_err());
    }

    #[test]
    fn r0_closed_form() {
        let nl = make_power(2.0).unwrap();
        for u in [1.0, 10.0, 1e4] {
            let exact = 6f64.sqrt() / f64::sqrt(u);
            assert!((nl.r0(u).unwrap() / exact - 1.0).abs() < 1e-8);
        }
    }
}
