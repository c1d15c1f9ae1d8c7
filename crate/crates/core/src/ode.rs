//! Dormand–Prince 5(4) integrator with caller-supplied error norm.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("right-hand side not finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("step limit {0} reached")]
    TooManySteps(usize),
}

/// Accepted step from `t0` to `t`.
#[derive(Debug, Clone, Copy)]
pub struct Step<const D: usize> {
    pub t0: f64,
    pub t: f64,
    pub y: [f64; D],
    /// `y(t) − y(t0)` accumulated from the stage weights, free of the
    /// cancellation in `y − y_prev`.
    pub incr: [f64; D],
    /// Right-hand side at `(t, y)`.
    pub dy: [f64; D],
    /// Embedded error estimate.
    pub err: [f64; D],
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn finite<const D: usize>(v: &[f64; D]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One trial step; `None` when a stage evaluates to a non-finite value.
fn trial<const D: usize>(
    rhs: &dyn Fn(f64, &[f64; D]) -> [f64; D],
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
) -> Option<Step<D>> {
    let mut k = [[0.0; D]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (i, yi) in ys.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..s {
                acc += A[s][j] * k[j][i];
            }
            *yi += h * acc;
        }
        k[s] = rhs(t + C[s] * h, &ys);
        if !finite(&k[s]) {
            return None;
        }
    }
    let mut incr = [0.0; D];
    let mut err = [0.0; D];
    for i in 0..D {
        let (mut a, mut e) = (0.0, 0.0);
        for s in 0..7 {
            a += B[s] * k[s][i];
            e += E[s] * k[s][i];
        }
        incr[i] = h * a;
        err[i] = h * e;
    }
    let mut y1 = *y;
    for i in 0..D {
        y1[i] += incr[i];
    }
    Some(Step {
        t0: t,
        t: t + h,
        y: y1,
        incr,
        dy: k[6],
        err,
    })
}

/// Controls for [`integrate`].
pub struct Controls<'a, const D: usize> {
    /// Initial step.
    pub h0: f64,
    /// Largest admissible step at the current abscissa.
    pub h_max: &'a dyn Fn(f64) -> f64,
    /// Scaled error of a trial step; accepted when `≤ 1`.
    pub norm: &'a dyn Fn(&Step<D>) -> f64,
    pub max_steps: usize,
}

/// Integrates forward from `(t0, y0)` calling `on_step` after each accepted
/// step until it returns `false`.
pub fn integrate<const D: usize>(
    rhs: &dyn Fn(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    ctl: &Controls<'_, D>,
    on_step: &mut dyn FnMut(&Step<D>) -> bool,
) -> Result<(), OdeError> {
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    if !finite(&k1) {
        return Err(OdeError::NonFinite { t });
    }
    let mut h = ctl.h0.min((ctl.h_max)(t));
    for _ in 0..ctl.max_steps {
        let h_floor = 1e-14 * t.abs().max(1e-300);
        if h <= h_floor {
            return Err(OdeError::StepUnderflow { t });
        }
        match trial(rhs, t, &y, &k1, h) {
            None => h *= 0.25,
            Some(step) => {
                let e = (ctl.norm)(&step);
                if e.is_finite() && e <= 1.0 && finite(&step.y) {
                    t = step.t;
                    y = step.y;
                    k1 = step.dy;
                    if !on_step(&step) {
                        return Ok(());
                    }
                    let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                    h = (h * grow).min((ctl.h_max)(t));
                } else {
                    let shrink = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
                    h *= shrink;
                }
            }
        }
    }
    Err(OdeError::TooManySteps(ctl.max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let rhs = |_t: f64, y: &[f64; 1]| [y[0]];
        let norm = |s: &Step<1>| s.err[0].abs() / (1e-12 * s.y[0].abs());
        let hmax = |_t: f64| 0.1;
        let ctl = Controls { h0: 0.01, h_max: &hmax, norm: &norm, max_steps: 10_000 };
        let mut last = (0.0, 1.0);
        integrate(&rhs, 0.0, [1.0], &ctl, &mut |s| {
            last = (s.t, s.y[0]);
            s.t < 5.0
        })
        .unwrap();
        assert!((last.1 / last.0.exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_increments() {
        let rhs = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let norm = |s: &Step<2>| s.err.iter().map(|e| e.abs()).fold(0.0, f64::max) / 1e-12;
        let hmax = |_t: f64| 0.5;
        let ctl = Controls { h0: 0.1, h_max: &hmax, norm: &norm, max_steps: 10_000 };
        let mut sum = 0.0;
        let mut end = [0.0; 2];
        let mut t_end = 0.0;
        integrate(&rhs, 0.0, [0.0, 1.0], &ctl, &mut |s| {
            sum += s.incr[0];
            end = s.y;
            t_end = s.t;
            s.t < 10.0
        })
        .unwrap();
        assert!((end[0] - t_end.sin()).abs() < 1e-9);
        assert!((sum - end[0]).abs() < 1e-12);
    }
}
