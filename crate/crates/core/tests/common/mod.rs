//! Oracles shared by the integration tests.

#![allow(dead_code)]

use blowup::series::{PuiseuxSeries, Variable};

/// Substitutes `u(d) = Σ a_k d^(k−m)` into `u_dd − (N−1)/(1−d)·u_d − u^p`
/// (the radial equation with `r = 1 − d`) and returns the residual
/// coefficients at exponents `k − m − 2`, divided by the leading scale
/// `|m(m+1)a₀|`.
pub fn expansion_residual(p: f64, dim: usize, coeffs: &[f64]) -> Vec<f64> {
    let m = 2.0 / (p - 1.0);
    let n = coeffs.len();
    let u = PuiseuxSeries::new(-m, 1.0, coeffs.to_vec(), Variable::D).unwrap();
    let du = u.derivative();
    let ddu = du.derivative();
    let geometric = PuiseuxSeries::new(0.0, 1.0, vec![1.0; n], Variable::D).unwrap();
    let drift = geometric.mul(&du).unwrap().scale(dim as f64 - 1.0);
    let res = ddu.sub(&drift).unwrap().sub(&u.pow(p).unwrap()).unwrap();
    let scale = (m * (m + 1.0) * coeffs[0]).abs();
    // Align to the lattice starting at −m − 2.
    let offset = ((res.alpha() - (-m - 2.0)) / res.delta()).round() as usize;
    let mut out = vec![0.0; offset];
    out.extend(res.coeffs().iter().map(|c| c / scale));
    out.truncate(n);
    out
}

/// Test matrix for the series engine: `(p, N, order)` with `order` below
/// any resonance.
pub const SERIES_MATRIX: &[(f64, usize, usize)] = &[
    (1.5, 1, 4),
    (1.5, 3, 4),
    (2.0, 1, 4),
    (2.0, 2, 4),
    (2.0, 3, 4),
    (3.0, 1, 3),
    (3.0, 3, 3),
    (5.0, 2, 2),
    (5.0, 3, 2),
    (9.0, 1, 4),
    (9.0, 3, 4),
    (2.5, 3, 4),
];
