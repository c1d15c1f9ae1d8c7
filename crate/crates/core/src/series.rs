//! Truncated generalized power series `Σ c_k·x^(α + kδ)`.
//!
//! A series with `n` stored coefficients is exact through exponent
//! `α + (n−1)δ`; every operation returns the longest prefix that its operands
//! determine, so truncation is tracked rather than assumed.

use std::fmt;

use thiserror::Error;

/// Tolerance, in lattice steps, for treating two exponents as equal.
const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("lattices do not align: {0}")]
    Lattice(String),
    #[error("variables differ: {0:?} and {1:?}")]
    Variable(Variable, Variable),
    #[error("leading coefficient {0} not admissible for this operation")]
    Leading(f64),
    #[error("term x^{exponent} cannot be integrated termwise: {reason}")]
    Divergent { exponent: f64, reason: &'static str },
    #[error("invalid series: {0}")]
    Invalid(String),
}

/// Meaning of the expansion variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// `x = 1/u`.
    UInverse,
    /// `x = d`, the distance to the boundary.
    D,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variable::UInverse => "1/u",
            Variable::D => "d",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuiseuxSeries {
    alpha: f64,
    delta: f64,
    coeffs: Vec<f64>,
    var: Variable,
}

impl PuiseuxSeries {
    pub fn new(alpha: f64, delta: f64, coeffs: Vec<f64>, var: Variable) -> Result<Self, SeriesError> {
        if !(delta > 0.0 && delta.is_finite() && alpha.is_finite()) {
            return Err(SeriesError::Invalid(format!("alpha = {alpha}, delta = {delta}")));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SeriesError::Invalid("coefficients must be finite and non-empty".into()));
        }
        Ok(Self { alpha, delta, coeffs, var })
    }

    /// `c·x^alpha` known through `len` lattice terms (the rest zero).
    pub fn monomial(c: f64, alpha: f64, delta: f64, len: usize, var: Variable) -> Result<Self, SeriesError> {
        let mut coeffs = vec![0.0; len.max(1)];
        coeffs[0] = c;
        Self::new(alpha, delta, coeffs, var)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn variable(&self) -> Variable {
        self.var
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exponent of the `k`-th stored term.
    pub fn exponent(&self, k: usize) -> f64 {
        self.alpha + k as f64 * self.delta
    }

    /// First exponent not determined by the stored terms.
    pub fn order(&self) -> f64 {
        self.exponent(self.coeffs.len())
    }

    pub fn truncate(mut self, len: usize) -> Self {
        self.coeffs.truncate(len.max(1));
        self
    }

    /// Partial sum at `x > 0`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * x.powf(self.exponent(k)))
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }

    fn compatible(&self, other: &Self) -> Result<(), SeriesError> {
        if self.var != other.var {
            return Err(SeriesError::Variable(self.var, other.var));
        }
        if (self.delta - other.delta).abs() > LATTICE_TOL * self.delta {
            return Err(SeriesError::Lattice(format!("steps {} and {}", self.delta, other.delta)));
        }
        Ok(())
    }

    /// Lattice offset of exponent `e` relative to `alpha`.
    fn steps_from(&self, e: f64) -> Result<usize, SeriesError> {
        let k = (e - self.alpha) / self.delta;
        let r = k.round();
        if (k - r).abs() > LATTICE_TOL || r < -0.5 {
            return Err(SeriesError::Lattice(format!(
                "exponent {e} is not on the lattice {} + k·{}",
                self.alpha, self.delta
            )));
        }
        Ok(r as usize)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.compatible(other)?;
        let (lo, hi) = if self.alpha <= other.alpha { (self, other) } else { (other, self) };
        let shift = lo.steps_from(hi.alpha)?;
        let len = lo.coeffs.len().min(shift + hi.coeffs.len());
        let mut coeffs = lo.coeffs[..len].to_vec();
        for (k, c) in hi.coeffs.iter().enumerate() {
            if shift + k < len {
                coeffs[shift + k] += c;
            }
        }
        Ok(Self { alpha: lo.alpha, delta: lo.delta, coeffs, var: lo.var })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.compatible(other)?;
        let len = self.coeffs.len().min(other.coeffs.len());
        let coeffs = (0..len)
            .map(|n| (0..=n).map(|k| self.coeffs[k] * other.coeffs[n - k]).sum())
            .collect();
        Ok(Self {
            alpha: self.alpha + other.alpha,
            delta: self.delta,
            coeffs,
            var: self.var,
        })
    }

    /// `s^beta` for a positive leading coefficient (any sign when `beta` is
    /// an integer), by the J.C.P. Miller recurrence.
    pub fn pow(&self, beta: f64) -> Result<Self, SeriesError> {
        let c0 = self.coeffs[0];
        let integral = beta.fract() == 0.0;
        if c0 == 0.0 || (!integral && c0 < 0.0) {
            return Err(SeriesError::Leading(c0));
        }
        let n = self.coeffs.len();
        let mut g = vec![0.0; n];
        g[0] = if integral { c0.powi(beta as i32) } else { c0.powf(beta) };
        for j in 1..n {
            let mut acc = 0.0;
            for k in 1..=j {
                acc += ((beta + 1.0) * k as f64 - j as f64) * self.coeffs[k] * g[j - k];
            }
            g[j] = acc / (j as f64 * c0);
        }
        Ok(Self {
            alpha: beta * self.alpha,
            delta: self.delta,
            coeffs: g,
            var: self.var,
        })
    }

    pub fn recip(&self) -> Result<Self, SeriesError> {
        self.pow(-1.0)
    }

    pub fn sqrt(&self) -> Result<Self, SeriesError> {
        if self.coeffs[0] <= 0.0 {
            return Err(SeriesError::Leading(self.coeffs[0]));
        }
        self.pow(0.5)
    }

    /// Termwise derivative in `x`.
    pub fn derivative(&self) -> Self {
        Self {
            alpha: self.alpha - 1.0,
            delta: self.delta,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * self.exponent(k))
                .collect(),
            var: self.var,
        }
    }

    /// For `x = 1/u`: termwise `∫_t^∞ s^(−e) ds = t^(1−e)/(e−1)`, so each
    /// `x^e` becomes `x^(e−1)/(e−1)`. Every exponent must exceed 1.
    pub fn integrate_tail(&self) -> Result<Self, SeriesError> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (k, c) in self.coeffs.iter().enumerate() {
            let e = self.exponent(k);
            if e <= 1.0 + LATTICE_TOL {
                return Err(SeriesError::Divergent {
                    exponent: e,
                    reason: "tail integral of u^(-e) needs e > 1",
                });
            }
            coeffs.push(c / (e - 1.0));
        }
        Ok(Self { alpha: self.alpha - 1.0, coeffs, ..self.clone() })
    }

    /// For `x = 1/u`: the antiderivative in `u` without constant, so each
    /// `x^e` becomes `x^(e−1)/(1−e)`. A term `x^1` would produce a logarithm.
    pub fn integrate_indefinite(&self) -> Result<Self, SeriesError> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (k, c) in self.coeffs.iter().enumerate() {
            let e = self.exponent(k);
            if (e - 1.0).abs() <= LATTICE_TOL {
                return Err(SeriesError::Divergent {
                    exponent: e,
                    reason: "antiderivative of 1/u is logarithmic",
                });
            }
            coeffs.push(c / (1.0 - e));
        }
        Ok(Self { alpha: self.alpha - 1.0, coeffs, ..self.clone() })
    }

    /// `outer(inner)` for an ordinary power series `outer = Σ b_j y^j` and
    /// `inner` with `alpha = delta` (so `inner^j` stays on the lattice).
    pub fn compose(outer: &[f64], inner: &Self) -> Result<Self, SeriesError> {
        if (inner.alpha - inner.delta).abs() > LATTICE_TOL * inner.delta {
            return Err(SeriesError::Lattice("inner series must start at x^delta".into()));
        }
        let n = inner.coeffs.len() + 1;
        // Horner's rule on a series starting at x^0.
        let mut acc = vec![0.0; n];
        for &b in outer.iter().rev() {
            let mut next = vec![0.0; n];
            next[0] = b;
            for i in 0..n {
                if acc[i] == 0.0 {
                    continue;
                }
                for (j, c) in inner.coeffs.iter().enumerate() {
                    if i + j + 1 < n {
                        next[i + j + 1] += acc[i] * c;
                    }
                }
            }
            acc = next;
        }
        Ok(Self {
            alpha: 0.0,
            delta: inner.delta,
            coeffs: acc,
            var: inner.var,
        })
    }

    /// Substitutes `x → x·(1 + c·x^(kδ))` into `x^alpha·Σ c_j x^(jδ)`,
    /// truncated to the stored length.
    pub fn compose_shift(&self, c: f64, k: usize) -> Result<Self, SeriesError> {
        if k == 0 {
            return Err(SeriesError::Invalid("shift order must be positive".into()));
        }
        let n = self.coeffs.len();
        let mut one_plus = vec![0.0; n];
        one_plus[0] = 1.0;
        if k < n {
            one_plus[k] = c;
        }
        let base = Self { alpha: 0.0, delta: self.delta, coeffs: one_plus, var: self.var };
        let mut out = vec![0.0; n];
        for (j, cj) in self.coeffs.iter().enumerate() {
            if *cj == 0.0 {
                continue;
            }
            let factor = base.pow(self.exponent(j))?;
            for (i, f) in factor.coeffs.iter().enumerate() {
                if i + j < n {
                    out[i + j] += cj * f;
                }
            }
        }
        Ok(Self { coeffs: out, ..self.clone() })
    }

    /// Inverts `d = y·Σ s_j y^j` (this series, with `alpha = delta = 1`) to
    /// `y = d·Σ t_j d^j`.
    pub fn revert(&self) -> Result<Self, SeriesError> {
        if (self.alpha - 1.0).abs() > LATTICE_TOL || (self.delta - 1.0).abs() > LATTICE_TOL {
            return Err(SeriesError::Lattice("reversion needs y + O(y²) on the integer lattice".into()));
        }
        let s0 = self.coeffs[0];
        if s0 == 0.0 {
            return Err(SeriesError::Leading(s0));
        }
        let n = self.coeffs.len();
        let ratio = Self { alpha: 0.0, ..self.clone() };
        let mut y = Self::monomial(1.0 / s0, 1.0, 1.0, n, Variable::D)?;
        // Each pass of y = d / S(y) fixes one more coefficient.
        for _ in 0..n {
            let s_of_y = Self::compose(&ratio.coeffs, &y)?.truncate(n);
            let inv = s_of_y.recip()?;
            y = Self { alpha: 1.0, ..inv };
        }
        Ok(Self { var: Variable::D, ..y })
    }
}

impl fmt::Display for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}·{}^{}", self.var, self.exponent(k))?;
        }
        write!(f, " + O({}^{})", self.var, self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ser(alpha: f64, c: &[f64]) -> PuiseuxSeries {
        PuiseuxSeries::new(alpha, 1.0, c.to_vec(), Variable::D).unwrap()
    }

    #[test]
    fn geometric_reciprocal() {
        let r = ser(0.0, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).recip().unwrap();
        assert_eq!(r.coeffs(), &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn binomial_sqrt() {
        let s = ser(0.0, &[1.0, 2.0, 0.0, 0.0]).sqrt().unwrap();
        assert_eq!(&s.coeffs()[..3], &[1.0, 1.0, -0.5]);
    }

    #[test]
    fn tail_integral_of_inverse_square() {
        let s = PuiseuxSeries::monomial(1.0, 2.0, 1.0, 1, Variable::UInverse).unwrap();
        let t = s.integrate_tail().unwrap();
        assert_eq!((t.alpha(), t.coeffs()[0]), (1.0, 1.0));
        let bad = PuiseuxSeries::monomial(1.0, 1.0, 1.0, 1, Variable::UInverse).unwrap();
        assert!(bad.integrate_tail().is_err());
        assert!(bad.integrate_indefinite().is_err());
    }

    #[test]
    fn misaligned_lattices_are_rejected() {
        let a = PuiseuxSeries::new(0.0, 0.5, vec![1.0, 1.0], Variable::D).unwrap();
        let b = PuiseuxSeries::new(0.25, 0.5, vec![1.0], Variable::D).unwrap();
        assert!(a.add(&b).is_err());
        let c = PuiseuxSeries::new(0.0, 0.5, vec![1.0], Variable::UInverse).unwrap();
        assert!(a.mul(&c).is_err());
    }

    #[test]
    fn addition_tracks_truncation() {
        let a = ser(-2.0, &[1.0, 0.0, 0.0, 0.0]);
        let b = ser(-1.0, &[1.0]);
        let s = a.add(&b).unwrap();
        assert_eq!(s.coeffs(), &[1.0, 1.0]);
        assert_eq!(s.order(), 0.0);
    }

    #[test]
    fn reversion_of_tangent_like_series() {
        // d = y + y² has inverse y = d − d² + 2d³ − 5d⁴ + …
        let s = ser(1.0, &[1.0, 1.0, 0.0, 0.0, 0.0]);
        let y = s.revert().unwrap();
        assert_eq!(y.coeffs(), &[1.0, -1.0, 2.0, -5.0, 14.0]);
    }

    #[test]
    fn shift_matches_direct_expansion() {
        // (x(1 + c x))^(-2) = x^-2 (1 − 2c x + 3c² x² − …)
        let s = ser(-2.0, &[1.0, 0.0, 0.0]);
        let t = s.compose_shift(0.5, 1).unwrap();
        assert_eq!(t.coeffs(), &[1.0, -1.0, 0.75]);
    }
}
