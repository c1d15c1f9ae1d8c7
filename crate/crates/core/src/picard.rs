//! Fixed-point iteration for the profile slope `v(u)` of a radial large
//! solution.
//!
//! The map is
//!
//! ```text
//! N(v)(u) = √(2(F(u) − (N−1)∫_{U0}^u v/r dt)),   r(u, v) = 1 − ∫_u^∞ dt/v,
//! ```
//!
//! iterated from `v₀ = √(2F)` on `[U0, ∞)`. Iterates are stored as
//! `y = v/v₀ − 1` on nodes that are uniform in `z = ln R₀(u)`, where
//! `R₀(u) = ∫_u^∞ dt/v₀`; in that variable every quantity of interest is a
//! smooth, slowly varying function. `∫_u^∞ dt/v` is carried as
//! `R₀(u) + D(u)` so that the small correction `D` never suffers
//! cancellation against the leading term.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::nonlinearity::{keller_osserman, Nonlinearity, NonlinearityError};
use crate::numerics::{
    fd_weights_first, hermite, integrate_finite, integrate_tail, invert_monotone, kronrod15_nodes, Evaluator,
    QuadError, TailIntegral,
};
use crate::phase_plane::RadialSolution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("Keller-Osserman condition does not hold for {0}")]
    KoFails(String),
    #[error("no admissible U0 below {cap}")]
    U0NotFound { cap: f64 },
    #[error("iterate {k} leaves the ball: sup |v/v0 - 1| = {norm} > rho = {rho}")]
    BallViolation { k: usize, norm: f64, rho: f64 },
    #[error("radicand not positive at u = {u}; enlarge U0")]
    Radicand { u: f64 },
    #[error("not contracting at iteration {k}: kappa = {kappa}, step = {step:e}; try a larger U0")]
    NotContracting { k: usize, kappa: f64, step: f64 },
    #[error("query outside the computed range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// Radius of the ball `‖v/v₀ − 1‖_∞ ≤ rho`; must lie in `(0, 1/4)`.
    pub rho: f64,
    /// Grid nodes per decade of `R₀`.
    pub density: f64,
    pub sup_tol: f64,
    pub max_iters: usize,
    /// Overrides the automatic choice of `U0`.
    pub u0: Option<f64>,
    /// The grid extends until `R₀ ≤ min(d_floor, 10⁻³·R₀(U0))`.
    pub d_floor: f64,
    /// Constant `C` in `F̃ = F + C`.
    pub energy_shift: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            rho: 0.2,
            density: 50.0,
            sup_tol: 1e-10,
            max_iters: 50,
            u0: None,
            d_floor: 1e-7,
            energy_shift: 0.0,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<(), PicardError> {
        let bad = |m: String| Err(PicardError::InvalidConfig(m));
        if !(self.rho > 0.0 && self.rho < 0.25) {
            return bad(format!("rho = {} must lie in (0, 1/4)", self.rho));
        }
        if !(self.density >= 4.0) {
            return bad(format!("density = {} below 4 nodes per decade", self.density));
        }
        if !(self.sup_tol > 0.0) || self.max_iters == 0 {
            return bad("sup_tol and max_iters must be positive".into());
        }
        if !(self.d_floor > 0.0 && self.d_floor < 1.0) {
            return bad(format!("d_floor = {} outside (0, 1)", self.d_floor));
        }
        Ok(())
    }
}

/// Audit of the two sufficient conditions behind [`choose_u0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct U0Audit {
    /// `R₀(U0)/(1 − ρ)`, required `≤ 1/2`.
    pub radius_bound: f64,
    /// `sup_u 2(N−1)(G(u) − G(U0))/F(u)`, required `≤ ρ`.
    pub ball_bound: f64,
}

/// Evaluates the two conditions at `u0`.
pub fn audit_u0(nl: &Nonlinearity, dim: usize, rho: f64, u0: f64) -> Result<U0Audit, PicardError> {
    let radius_bound = nl.r0(u0)? / (1.0 - rho);
    let mut ball_bound: f64 = 0.0;
    if dim > 1 {
        let k = 2.0 * (dim as f64 - 1.0);
        let g0 = nl.big_g(u0);
        let top = nl.u_ceiling();
        let step = 2f64.powf(1.0 / 16.0);
        let mut u = u0;
        let mut below = 0;
        while u < top {
            let b = k * (nl.big_g(u) - g0) / nl.big_f(u);
            if b > ball_bound {
                ball_bound = b;
                below = 0;
            } else {
                below += 1;
                // The quotient decays once G = o(F) takes over.
                if below > 200 {
                    break;
                }
            }
            u = (u - nl.a()) * step + nl.a();
        }
    }
    Ok(U0Audit { radius_bound, ball_bound })
}

/// Smallest `U0 = a + 2^(j/8)·scale` with `R₀(U0)/(1−ρ) ≤ 1/2` and
/// `2(N−1)(G(u) − G(U0))/F(u) ≤ ρ` for all `u ≥ U0`.
pub fn choose_u0(nl: &Nonlinearity, dim: usize, rho: f64) -> Result<f64, PicardError> {
    if !(rho > 0.0 && rho < 0.25) {
        return Err(PicardError::InvalidConfig(format!("rho = {rho} must lie in (0, 1/4)")));
    }
    if !keller_osserman(nl).holds() {
        return Err(PicardError::KoFails(nl.label().to_string()));
    }
    let cap = nl.u_ceiling().min(1e12 * nl.scale());
    for j in -64..2000 {
        let u0 = nl.a() + 2f64.powf(j as f64 / 8.0) * nl.scale();
        if u0 > cap {
            break;
        }
        if nl.r0(u0)? / (1.0 - rho) > 0.5 {
            continue;
        }
        let audit = audit_u0(nl, dim, rho, u0)?;
        if audit.radius_bound <= 0.5 && audit.ball_bound <= rho {
            return Ok(u0);
        }
    }
    Err(PicardError::U0NotFound { cap })
}

struct Segment {
    /// Kronrod abscissae in `u`, with `z`, `v₀` and `F̃` there.
    t: [f64; 15],
    z: [f64; 15],
    v0: [f64; 15],
    big_f: [f64; 15],
    weight: [f64; 15],
}

/// Discretization of `[U0, Umax]` shared by all iterates.
pub struct PicardGrid {
    nl: Nonlinearity,
    dim: usize,
    shift: f64,
    u: Vec<f64>,
    z: Vec<f64>,
    big_f: Vec<f64>,
    segments: Vec<Segment>,
    r0: Evaluator,
    g_u0: f64,
}

impl std::fmt::Debug for PicardGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PicardGrid")
            .field("u0", &self.u[0])
            .field("umax", &self.u[self.u.len() - 1])
            .field("nodes", &self.u.len())
            .field("shift", &self.shift)
            .finish()
    }
}

impl PicardGrid {
    fn new(nl: &Nonlinearity, dim: usize, u0: f64, cfg: &PicardConfig) -> Result<Self, PicardError> {
        let shift = cfg.energy_shift;
        let r0: Evaluator = if shift == 0.0 {
            let nl = nl.clone();
            Arc::new(move |u| nl.r0(u).unwrap_or(f64::NAN))
        } else {
            let desc = nl
                .tail()
                .descriptor(0.5, 0.0)
                .ok_or_else(|| PicardError::KoFails(nl.label().to_string()))?;
            let big_f = nl.big_f_evaluator();
            let integrand: Evaluator = Arc::new(move |t| 1.0 / (2.0 * (big_f(t) + shift)).sqrt());
            let cache = TailIntegral::new(integrand, desc, u0, nl.scale(), nl.u_ceiling(), *nl.spec())?;
            Arc::new(move |u| cache.eval(u))
        };
        let f_shift = |u: f64| nl.big_f(u) + shift;
        if !(f_shift(u0) > 0.0) {
            return Err(PicardError::Radicand { u: u0 });
        }
        let z0 = r0(u0).ln();
        if !z0.is_finite() {
            return Err(PicardError::OutOfRange(format!("R0({u0}) not finite")));
        }
        let z_end = (cfg.d_floor.min(1e-3 * z0.exp())).ln();
        let dz = std::f64::consts::LN_10 / cfg.density;
        let cells = ((z0 - z_end) / dz).ceil().max(2.0) as usize;
        let dz = (z0 - z_end) / cells as f64;
        let mut u = vec![u0];
        let mut z = vec![z0];
        for i in 1..=cells {
            let target = z0 - i as f64 * dz;
            let prev = u[i - 1];
            let h = |x: f64| r0(x).ln();
            let x = invert_monotone(&h, target, (prev, prev + (prev - nl.a()).abs().max(nl.scale())), 1e-14)
                .map_err(|e| PicardError::OutOfRange(e.to_string()))?;
            u.push(x);
            z.push(r0(x).ln());
        }
        
        let big_f: Vec<f64> = u.iter().map(|&t| f_shift(t)).collect();
        let nodes = kronrod15_nodes();
        let mut segments = Vec::with_capacity(cells);
        for i in 0..cells {
            let (a, b) = (u[i], u[i + 1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let mut seg = Segment {
                t: [0.0; 15],
                z: [0.0; 15],
                v0: [0.0; 15],
                big_f: [0.0; 15],
                weight: [0.0; 15],
            };
            for (j, (x, w)) in nodes.iter().enumerate() {
                let t = mid + half * x;
                seg.t[j] = t;
                seg.z[j] = r0(t).ln();
                seg.big_f[j] = f_shift(t);
                seg.v0[j] = (2.0 * seg.big_f[j]).sqrt();
                seg.weight[j] = half * w;
            }
            segments.push(seg);
        }
        let g_u0 = if dim > 1 { nl.big_g(u0) } else { 0.0 };
        Ok(Self {
            nl: nl.clone(),
            dim,
            shift,
            u,
            z,

            big_f,
            segments,
            r0,
            g_u0,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.u
    }

    pub fn u0(&self) -> f64 {
        self.u[0]
    }

    pub fn umax(&self) -> f64 {
        self.u[self.u.len() - 1]
    }

    pub fn energy_shift(&self) -> f64 {
        self.shift
    }

    /// `F̃(u) = F(u) + C`.
    pub fn big_f(&self, u: f64) -> f64 {
        self.nl.big_f(u) + self.shift
    }

    /// `v₀(u) = √(2F̃(u))`.
    pub fn v0(&self, u: f64) -> f64 {
        (2.0 * self.big_f(u)).sqrt()
    }

    /// `R₀(u) = ∫_u^∞ dt/v₀`.
    pub fn r0(&self, u: f64) -> f64 {
        (self.r0)(u)
    }

    /// `u` with `ln R₀(u) = z`.
    fn u_of_z(&self, z: f64) -> Result<f64, PicardError> {
        let n = self.z.len();
        let h = |x: f64| self.r0(x).ln();
        let bracket = if z <= self.z[0] && z >= self.z[n - 1] {
            let j = self.z.partition_point(|&v| v > z).clamp(1, n - 1);
            (self.u[j - 1], self.u[j])
        } else {
            let top = self.umax();
            (top, 2.0 * top)
        };
        invert_monotone(&h, z, bracket, 1e-15 * z.abs().max(1.0)).map_err(|e| PicardError::OutOfRange(e.to_string()))
    }

    /// `G(u) − G(U0)`, the shape of the leading correction beyond `Umax`.
    fn g_rel(&self, u: f64) -> f64 {
        self.nl.big_g(u) - self.g_u0
    }

    fn locate(&self, u: f64) -> usize {
        let n = self.u.len();
        self.u.partition_point(|&v| v <= u).clamp(1, n - 1) - 1
    }
}

fn slopes(z: &[f64], y: &[f64]) -> Vec<f64> {
    let n = z.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2).min(n.saturating_sub(5));
            let hi = (lo + 5).min(n);
            let w = fd_weights_first(z[i], &z[lo..hi]);
            w.iter().zip(&y[lo..hi]).map(|(w, v)| w * v).sum()
        })
        .collect()
}

/// Iterate `v_k` stored as `y = v_k/v₀ − 1` on the grid, with
/// `D_k = ∫_u^∞ (1/v_k − 1/v₀)` and a tail model `y ≈ c·(G(u) − G(U0))/F̃(u)`
/// beyond `Umax`.
#[derive(Debug, Clone)]
pub struct VIterate {
    grid: Arc<PicardGrid>,
    k: usize,
    y: Vec<f64>,
    dy: Vec<f64>,
    corr: Vec<f64>,
    dcorr: Vec<f64>,
    tail_coeff: f64,
}

impl VIterate {
    fn from_nodes(grid: Arc<PicardGrid>, k: usize, y: Vec<f64>) -> Result<Self, PicardError> {
        let n = y.len();
        let dy = slopes(&grid.z, &y);
        let umax = grid.umax();
        let tail_coeff = if grid.dim > 1 {
            y[n - 1] * grid.big_f[n - 1] / grid.g_rel(umax)
        } else {
            0.0
        };
        let mut it = Self {
            grid,
            k,
            y,
            dy,
            corr: vec![0.0; n],
            dcorr: vec![0.0; n],
            tail_coeff,
        };
        if it.grid.dim > 1 {
            let g = it.grid.clone();
            let mut acc = it.tail_corr(umax)?;
            it.corr[n - 1] = acc;
            for i in (0..n - 1).rev() {
                let seg = &g.segments[i];
                let mut s = 0.0;
                for j in 0..15 {
                    let y = it.y_in(i, seg.z[j]);
                    s += seg.weight[j] * (-y / (1.0 + y)) / seg.v0[j];
                }
                acc += s;
                it.corr[i] = acc;
            }
            for i in 0..n {
                let y = it.y[i];
                it.dcorr[i] = g.z[i].exp() * (-y / (1.0 + y));
            }
        }
        Ok(it)
    }

    fn y_in(&self, i: usize, z: f64) -> f64 {
        let g = &self.grid;
        hermite(g.z[i], g.z[i + 1], self.y[i], self.y[i + 1], self.dy[i], self.dy[i + 1], z)
    }

    fn corr_in(&self, i: usize, z: f64) -> f64 {
        let g = &self.grid;
        hermite(g.z[i], g.z[i + 1], self.corr[i], self.corr[i + 1], self.dcorr[i], self.dcorr[i + 1], z)
    }

    fn y_tail(&self, u: f64) -> f64 {
        self.tail_coeff * self.grid.g_rel(u) / self.grid.big_f(u)
    }

    /// `∫_u^∞ (1/v − 1/v₀)` for `u ≥ Umax` from the tail model.
    fn tail_corr(&self, u: f64) -> Result<f64, PicardError> {
        if self.tail_coeff == 0.0 {
            return Ok(0.0);
        }
        let g = &self.grid;
        let mut desc = g
            .nl
            .tail()
            .descriptor(1.0, 1.0)
            .ok_or_else(|| PicardError::KoFails(g.nl.label().to_string()))?;
        desc.cutoff = desc.cutoff.max(u);
        let h = |t: f64| {
            let big_f = g.big_f(t);
            if big_f.is_infinite() {
                return 0.0;
            }
            let y = self.tail_coeff * g.g_rel(t) / big_f;
            (-y / (1.0 + y)) / (2.0 * big_f).sqrt()
        };
        Ok(integrate_tail(&h, u, &desc, g.nl.spec())?.finite().unwrap_or(f64::NAN))
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &PicardGrid {
        &self.grid
    }

    /// `v_k/v₀ − 1` at the grid nodes.
    pub fn relative_deviation(&self) -> &[f64] {
        &self.y
    }

    /// `v_k(u)/v₀(u)`.
    pub fn ratio_at(&self, u: f64) -> f64 {
        let g = &self.grid;
        if u >= g.umax() {
            return 1.0 + self.y_tail(u);
        }
        let i = g.locate(u);
        1.0 + self.y_in(i, g.r0(u).ln())
    }

    /// `v_k(u)` for `u ≥ U0`.
    pub fn v_at(&self, u: f64) -> f64 {
        self.ratio_at(u) * self.grid.v0(u)
    }

    /// `S_k(u) = ∫_u^∞ dt/v_k`.
    pub fn tail_integral(&self, u: f64) -> Result<f64, PicardError> {
        let g = &self.grid;
        if u < g.u0() {
            return Err(PicardError::OutOfRange(format!("u = {u} below U0 = {}", g.u0())));
        }
        if u >= g.umax() {
            return Ok(g.r0(u) + self.tail_corr(u)?);
        }
        let i = g.locate(u);
        let z = g.r0(u).ln();
        Ok(z.exp() + self.corr_in(i, z))
    }

    /// `S_k` at a point given by `z = ln R₀(u)` on the grid.
    fn s_of_z(&self, z: f64) -> f64 {
        let g = &self.grid;
        let n = g.z.len();
        let i = g.z.partition_point(|&v| v > z).clamp(1, n - 1) - 1;
        z.exp() + self.corr_in(i, z)
    }

    /// Sup of `|y|` over nodes and four interior points per cell.
    pub fn ball_norm(&self) -> f64 {
        self.sup_over(|s, i, z| s.y_in(i, z))
    }

    fn sup_over(&self, f: impl Fn(&Self, usize, f64) -> f64) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for i in 0..g.z.len() - 1 {
            for q in 0..5 {
                let z = g.z[i] + (g.z[i + 1] - g.z[i]) * q as f64 / 5.0;
                m = m.max(f(self, i, z).abs());
            }
        }
        m.max(f(self, g.z.len() - 2, g.z[g.z.len() - 1]).abs())
    }

    /// `‖v_k − other‖ = sup |(v_k − v_other)/v₀|` over nodes plus midpoints.
    pub fn distance(&self, other: &VIterate) -> f64 {
        self.sup_over(|s, i, z| s.y_in(i, z) - other.y_in(i, z))
    }

    /// Solves `∫_u^∞ dt/v_k = 1 − r` for `u`.
    pub fn invert(&self, r: f64) -> Result<f64, PicardError> {
        let d = 1.0 - r;
        let g = &self.grid;
        let n = g.z.len();
        let s_top = g.z[0].exp() + self.corr[0];
        if !(d > 0.0 && d <= s_top) {
            return Err(PicardError::OutOfRange(format!(
                "1 - r = {d} outside (0, {s_top}]; r must exceed r_min = {}",
                1.0 - s_top
            )));
        }
        let s_end = g.z[n - 1].exp() + self.corr[n - 1];
        if d >= s_end {
            let h = |z: f64| self.s_of_z(z).ln();
            let z = invert_monotone(&h, d.ln(), (g.z[n - 1], g.z[0]), 1e-15)
                .map_err(|e| PicardError::OutOfRange(e.to_string()))?;
            return g.u_of_z(z);
        }
        let h = |u: f64| self.tail_integral(u).map(f64::ln).unwrap_or(f64::NAN);
        let umax = g.umax();
        invert_monotone(&h, d.ln(), (umax, 2.0 * umax), 1e-15).map_err(|e| PicardError::OutOfRange(e.to_string()))
    }
}

/// Applies the map once.
pub fn apply_n(v: &VIterate) -> Result<VIterate, PicardError> {
    let g = v.grid.clone();
    let n = g.u.len();
    if g.dim == 1 {
        return VIterate::from_nodes(g, v.k + 1, vec![0.0; n]);
    }
    let k = g.dim as f64 - 1.0;
    let mut q = 0.0;
    let mut y = vec![0.0; n];
    for i in 0..n {
        if i > 0 {
            let seg = &g.segments[i - 1];
            let mut s = 0.0;
            for j in 0..15 {
                let z = seg.z[j];
                let w = 1.0 + v.y_in(i - 1, z);
                let r = 1.0 - (z.exp() + v.corr_in(i - 1, z));
                s += seg.weight[j] * seg.v0[j] * w / r;
            }
            q += s;
        }
        let x = k * q / g.big_f[i];
        if !(x < 1.0) {
            return Err(PicardError::Radicand { u: g.u[i] });
        }
        y[i] = -x / (1.0 + (1.0 - x).sqrt());
    }
    VIterate::from_nodes(g, v.k + 1, y)
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub u0: f64,
    pub rho: f64,
    /// `v₀, v₁, …` up to the last computed iterate.
    pub iterates: Vec<VIterate>,
    /// `‖v_{k+1} − v_k‖` for `k = 0, 1, …`.
    pub steps: Vec<f64>,
    /// `κ_k = ‖v_{k+1} − v_k‖/‖v_k − v_{k−1}‖`.
    pub contraction: Vec<f64>,
    /// Iteration count at which the step fell below `sup_tol`.
    pub converged_at: Option<usize>,
}

impl PicardResult {
    pub fn fixed_point(&self) -> &VIterate {
        self.iterates.last().expect("at least v0")
    }

    pub fn iterate(&self, k: usize) -> Option<&VIterate> {
        self.iterates.get(k)
    }

    /// `‖N(v) − v‖` for the returned fixed point.
    pub fn residual(&self) -> f64 {
        *self.steps.last().unwrap_or(&0.0)
    }

    /// Writes `k,u,v_over_v0` rows for every iterate at 17 significant digits.
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "k,u,v_over_v0")?;
        for it in &self.iterates {
            for (u, y) in it.grid.u.iter().zip(&it.y) {
                writeln!(w, "{},{:.16e},{:.16e}", it.k, u, 1.0 + y)?;
            }
        }
        Ok(())
    }
}

/// Starting point `v₀` on a fresh grid.
pub fn initial_iterate(nl: &Nonlinearity, dim: usize, cfg: &PicardConfig) -> Result<VIterate, PicardError> {
    cfg.validate()?;
    if dim == 0 {
        return Err(PicardError::InvalidConfig("dimension must be at least 1".into()));
    }
    let u0 = match cfg.u0 {
        Some(u) => u,
        None => choose_u0(nl, dim, cfg.rho)?,
    };
    let grid = Arc::new(PicardGrid::new(nl, dim, u0, cfg)?);
    let n = grid.u.len();
    VIterate::from_nodes(grid, 0, vec![0.0; n])
}

/// Iterates the map from `v₀` until successive iterates differ by less than
/// `sup_tol`.
pub fn fixed_point(nl: &Nonlinearity, dim: usize, cfg: &PicardConfig) -> Result<PicardResult, PicardError> {
    let v0 = initial_iterate(nl, dim, cfg)?;
    let u0 = v0.grid.u0();
    let mut iterates = vec![v0];
    let mut steps: Vec<f64> = Vec::new();
    let mut contraction = Vec::new();
    let mut converged_at = None;
    let mut growing = 0;
    for k in 1..=cfg.max_iters {
        let next = apply_n(iterates.last().unwrap())?;
        let norm = next.ball_norm();
        if norm > cfg.rho {
            return Err(PicardError::BallViolation { k, norm, rho: cfg.rho });
        }
        let step = next.distance(iterates.last().unwrap());
        if let Some(&prev) = steps.last() {
            let kappa = if prev > 0.0 { step / prev } else { 0.0 };
            contraction.push(kappa);
            if kappa >= 1.0 && step > 10.0 * cfg.sup_tol {
                growing += 1;
                if growing >= 3 {
                    return Err(PicardError::NotContracting { k, kappa, step });
                }
            } else {
                growing = 0;
            }
        }
        steps.push(step);
        iterates.push(next);
        if step < cfg.sup_tol {
            converged_at = Some(k);
            break;
        }
    }
    Ok(PicardResult {
        u0,
        rho: cfg.rho,
        iterates,
        steps,
        contraction,
        converged_at,
    })
}

/// `u_k(r)` from `∫_{u_k}^∞ dt/v_k = 1 − r`.
pub fn invert_uk(vk: &VIterate, r: f64) -> Result<f64, PicardError> {
    vk.invert(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub r: f64,
    pub u: f64,
    pub uk: f64,
    pub uk_next: f64,
    /// `|∫_{u_k}^u dt/v₀| / ∫_{u_k}^∞ dt/v₀`.
    pub ratio: f64,
    pub ratio_next: f64,
}

/// Compares `u_k(r)` and `u_{k+1}(r)` with the solution `u(r)` in the
/// `∫ dt/v₀` metric.
///
/// The map is run for `F̃ = F − g(U0)`, the energy constant that belongs to
/// the given solution, so that its fixed point is that solution's profile.
pub fn asymptotic_gap(
    nl: &Nonlinearity,
    sol: &RadialSolution,
    k: usize,
    radii: &[f64],
    cfg: &PicardConfig,
) -> Result<(PicardResult, Vec<GapRow>), PicardError> {
    let dim = sol.dim();
    let path = sol.path();
    let u0 = match cfg.u0 {
        Some(u) => u,
        None => choose_u0(nl, dim, cfg.rho)?.max(path.u_min()),
    };
    let shift = -path
        .g_at(u0)
        .map_err(|e| PicardError::OutOfRange(e.to_string()))?;
    let cfg = PicardConfig {
        u0: Some(u0),
        energy_shift: shift,
        max_iters: cfg.max_iters.max(k + 1),
        ..*cfg
    };
    let mut result = fixed_point(nl, dim, &cfg)?;
    while result.iterates.len() < k + 2 {
        let next = apply_n(result.iterates.last().unwrap())?;
        result.iterates.push(next);
    }
    let grid = result.iterates[0].grid.clone();
    let spec = *nl.spec();
    let ratio = |uk: f64, u: f64| -> Result<f64, PicardError> {
        let num = integrate_finite(&|t| 1.0 / grid.v0(t), uk, u, &spec)?;
        Ok(num.abs() / grid.r0(uk))
    };
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let u = sol.u_at(r).map_err(|e| PicardError::OutOfRange(e.to_string()))?;
        let uk = result.iterates[k].invert(r)?;
        let uk_next = result.iterates[k + 1].invert(r)?;
        rows.push(GapRow {
            r,
            u,
            uk,
            uk_next,
            ratio: ratio(uk, u)?,
            ratio_next: ratio(uk_next, u)?,
        });
    }
    Ok((result, rows))
}
