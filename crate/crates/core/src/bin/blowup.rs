//! Command-line front end for the blow-up profile library.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use blowup::config::{ConfigError, FamilySpec, RawConfig, RunConfig};
use blowup::expansion::{power_law_expansion, resonance_index, singular_term_count, three_term_table_from, R2Form};
use blowup::nonlinearity::{keller_osserman, KoVerdict, Nonlinearity};
use blowup::phase_plane::{solve_large_solution, PhaseError, RadialSolution};
use blowup::picard::{asymptotic_gap, fixed_point, PicardConfig, PicardError};
use blowup::universality::{classify, verify_one_term, PhiLimit, Verdict};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Radial large solutions of Δu = f(u) in the unit ball.
///
/// Settings come from `--config` files (`key = value`, optional `[section]`
/// headers) and are overridden by flags. Tables go to `--out` as CSV with a
/// comment header recording the version and the resolved settings; a summary
/// is printed as `key=value` lines.
///
/// Exit codes: 0 success, 2 negative verdict, 3 inconclusive,
/// 64 usage or configuration error, 70 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "blowup", version, about, long_about)]
struct Cli {
    /// Configuration file; repeat to run several jobs.
    #[arg(long, global = true, value_name = "PATH")]
    config: Vec<PathBuf>,
    /// CSV output file, or a directory when several jobs run.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Number of jobs run concurrently.
    #[arg(long, global = true, value_name = "K", default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Ko,
    Solve,
    Picard,
    Expand,
    Universal,
    Compare,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether ∫^∞ dt/√F(t) converges, F' = f.
    ///
    /// Exit 0 when it converges, 2 when it diverges, 3 when the tail of F
    /// has no analytic model.
    Ko(Params),
    /// Solve u'' + (N−1)/r·u' = f(u) with u → ∞ at r = 1.
    ///
    /// Writes the phase-plane path u,g,v,d (v = √(2(F − g)), d = 1 − r).
    Solve(Params),
    /// Iterate v ↦ √(2(F − (N−1)∫_{U0}^u v/r)), r = 1 − ∫_u^∞ dt/v, to its fixed point.
    ///
    /// Writes k,u,v/v₀ for every iterate, v₀ = √(2F).
    Picard(Params),
    /// Boundary expansion of the profile.
    ///
    /// For f = u^p: coefficients of u = d^(−2/(p−1))·Σ a_k d^k.
    /// Otherwise: R₀, R₁, R₂ in 1 − r ≈ R₀(u) + R₁(u) + R₂(u) at each radius.
    Expand(Params),
    /// Decide whether Φ(u) = √(2F)∫_u^∞ G/(2F)^(3/2) tends to zero, G' = √(2F).
    ///
    /// Exit 0 when Φ → 0, 2 when it does not, 3 when undecided.
    Universal(Params),
    /// Compare the solution with the iterates u_k, u_{k+1} and with u₀ = R₀⁻¹(1 − r).
    Compare(Params),
}

impl Command {
    fn split(&self) -> (Kind, &Params) {
        match self {
            Command::Ko(p) => (Kind::Ko, p),
            Command::Solve(p) => (Kind::Solve, p),
            Command::Picard(p) => (Kind::Picard, p),
            Command::Expand(p) => (Kind::Expand, p),
            Command::Universal(p) => (Kind::Universal, p),
            Command::Compare(p) => (Kind::Compare, p),
        }
    }
}

/// Flags overriding configuration keys of the same name.
#[derive(Args, Debug, Default)]
struct Params {
    /// power, exponential or expression.
    #[arg(long)]
    family: Option<String>,
    /// Exponent of f = u^p.
    #[arg(long)]
    p: Option<String>,
    /// f(u) as an expression in u.
    #[arg(long)]
    expr: Option<String>,
    /// Threshold below which f vanishes.
    #[arg(long)]
    a: Option<String>,
    /// Tail model of F for expressions: power, exponential or numeric.
    #[arg(long)]
    tail: Option<String>,
    /// Amplitude c of the tail model F ~ c·u^q or F ~ c·e^(q·u).
    #[arg(long)]
    tail_amplitude: Option<String>,
    /// Exponent q of the tail model.
    #[arg(long)]
    tail_exponent: Option<String>,
    /// Value of u from which F is taken to follow the tail model.
    #[arg(long)]
    tail_cutoff: Option<String>,
    /// Space dimension.
    #[arg(long = "N", value_name = "N")]
    dim: Option<String>,
    /// Comma-separated radii in (0, 1).
    #[arg(long)]
    radii: Option<String>,
    /// Comma-separated distances 1 − r.
    #[arg(long)]
    distances: Option<String>,
    /// Lower limit of the inner antiderivatives.
    #[arg(long)]
    lower_limit: Option<String>,
    /// Tolerance on the blow-up radius.
    #[arg(long)]
    tol_radius: Option<String>,
    /// Ball radius for the iteration.
    #[arg(long)]
    rho: Option<String>,
    /// Stop when successive iterates differ by less than this.
    #[arg(long)]
    sup_tol: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    /// Grid nodes per unit of ln R₀.
    #[arg(long)]
    density: Option<String>,
    /// Iterate index compared against the solution.
    #[arg(long)]
    k: Option<String>,
    /// Highest coefficient index.
    #[arg(long)]
    order: Option<String>,
    /// Recorded in the output header; results are deterministic.
    #[arg(long)]
    seed: Option<String>,
}

impl Params {
    fn overrides(&self) -> Result<RawConfig, ConfigError> {
        let mut raw = RawConfig::default();
        let pairs = [
            ("family", &self.family),
            ("p", &self.p),
            ("expr", &self.expr),
            ("a", &self.a),
            ("tail", &self.tail),
            ("tail_amplitude", &self.tail_amplitude),
            ("tail_exponent", &self.tail_exponent),
            ("tail_cutoff", &self.tail_cutoff),
            ("N", &self.dim),
            ("radii", &self.radii),
            ("distances", &self.distances),
            ("lower_limit", &self.lower_limit),
            ("tol_radius", &self.tol_radius),
            ("rho", &self.rho),
            ("sup_tol", &self.sup_tol),
            ("max_iters", &self.max_iters),
            ("density", &self.density),
            ("k", &self.k),
            ("order", &self.order),
            ("seed", &self.seed),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                raw.set(key, v.clone())?;
            }
        }
        Ok(raw)
    }
}

const EXIT_NEGATIVE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_SOFTWARE: u8 = 70;

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: e.to_string() }
    }
    fn numeric(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_SOFTWARE, message: e.to_string() }
    }
}

impl From<PhaseError> for Failure {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::KoFails(_) => Self { code: EXIT_NEGATIVE, message: e.to_string() },
            PhaseError::InvalidInput(_) => Self::usage(e),
            _ => Self::numeric(e),
        }
    }
}

impl From<PicardError> for Failure {
    fn from(e: PicardError) -> Self {
        match e {
            PicardError::KoFails(_) => Self { code: EXIT_NEGATIVE, message: e.to_string() },
            PicardError::InvalidConfig(_) => Self::usage(e),
            _ => Self::numeric(e),
        }
    }
}

/// One job: its settings and where its table goes.
struct Job {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

/// What a job produced: summary text, CSV body and exit status.
struct Outcome {
    summary: String,
    table: Option<String>,
    errors: String,
    code: u8,
}

fn picard_config(cfg: &RunConfig) -> PicardConfig {
    PicardConfig {
        rho: cfg.rho,
        density: cfg.density,
        sup_tol: cfg.sup_tol,
        max_iters: cfg.max_iters,
        ..PicardConfig::default()
    }
}

fn csv(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String, Failure> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(Failure::numeric)?;
    String::from_utf8(buf).map_err(Failure::numeric)
}

fn solve(nl: &Nonlinearity, cfg: &RunConfig) -> Result<RadialSolution, Failure> {
    Ok(solve_large_solution(nl, cfg.dim, cfg.tol_radius)?)
}

fn run_ko(nl: &Nonlinearity) -> Outcome {
    let report = keller_osserman(nl);
    let mut s = String::new();
    let verdict = match report.verdict {
        KoVerdict::Holds => "Holds",
        KoVerdict::Fails => "Fails",
        KoVerdict::Inconclusive => "Inconclusive",
    };
    let _ = writeln!(s, "verdict={verdict}");
    let _ = writeln!(s, "lower_limit={:e}", report.lower_limit);
    match report.tail_integral.and_then(|i| i.finite()) {
        Some(v) => {
            let _ = writeln!(s, "tail_integral={v:.16e}");
        }
        None if report.verdict == KoVerdict::Fails => {
            let _ = writeln!(s, "tail_integral=inf");
        }
        None => {}
    }
    let code = match report.verdict {
        KoVerdict::Holds => 0,
        KoVerdict::Fails => EXIT_NEGATIVE,
        KoVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    let table = format!("key,value\nverdict,{verdict}\n");
    Outcome { summary: s, table: Some(table), errors: String::new(), code }
}

fn run_solve(nl: &Nonlinearity, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let sol = solve(nl, cfg)?;
    let mut s = String::new();
    let _ = writeln!(s, "center_value={:.16e}", sol.center_value());
    let _ = writeln!(s, "raw_radius={:.16e}", sol.raw_radius());
    let _ = writeln!(s, "shots={}", sol.shooting_history().len());
    let _ = writeln!(s, "overlap_rel_diff={:.3e}", sol.overlap_rel_diff());
    let _ = writeln!(s, "ode_residual={:.3e}", sol.ode_residual());
    for &r in &cfg.radii {
        let _ = writeln!(s, "u({r})={:.16e}", sol.u_at(r)?);
    }
    let table = csv(|w| sol.path().write_csv(w))?;
    Ok(Outcome { summary: s, table: Some(table), errors: String::new(), code: 0 })
}

fn run_picard(nl: &Nonlinearity, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let result = fixed_point(nl, cfg.dim, &picard_config(cfg))?;
    let mut s = String::new();
    let _ = writeln!(s, "u0={:.16e}", result.u0);
    let _ = writeln!(s, "iterations={}", result.steps.len());
    match result.converged_at {
        Some(k) => {
            let _ = writeln!(s, "converged_at_iteration={k}");
        }
        None => {
            let _ = writeln!(s, "converged_at_iteration=none");
        }
    }
    let _ = writeln!(s, "residual={:.3e}", result.residual());
    if let Some(kappa) = result.contraction.iter().copied().reduce(f64::max) {
        let _ = writeln!(s, "max_contraction={kappa:.3e}");
    }
    let _ = writeln!(s, "ball_norm={:.3e}", result.fixed_point().ball_norm());
    let code = if result.converged_at.is_some() { 0 } else { EXIT_SOFTWARE };
    let table = csv(|w| result.write_csv(w))?;
    Ok(Outcome { summary: s, table: Some(table), errors: String::new(), code })
}

fn default_order(p: f64) -> usize {
    let cap = resonance_index(p).map_or(4, |i| (i - 1).min(4));
    cap.max(singular_term_count(p).map_or(1, |c| c - 1))
}

fn run_expand(nl: &Nonlinearity, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let mut s = String::new();
    if let FamilySpec::Power { p } = cfg.family {
        let order = cfg.order.unwrap_or_else(|| default_order(p));
        let exp = power_law_expansion(p, cfg.dim, order).map_err(Failure::numeric)?;
        let _ = writeln!(s, "m={:.16e}", exp.m);
        let _ = writeln!(s, "singular_terms={}", exp.singular_index + 1);
        if let Some(i) = exp.resonance {
            let _ = writeln!(s, "resonance_index={i}");
        }
        for (k, a) in exp.coeffs.iter().enumerate() {
            let _ = writeln!(s, "a{k}={a:.16e}");
        }
        let table = csv(|w| exp.write_csv(w))?;
        return Ok(Outcome { summary: s, table: Some(table), errors: String::new(), code: 0 });
    }
    let grid = cfg
        .radii
        .iter()
        .map(|r| nl.r0_inverse(1.0 - r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::numeric)?;
    let lower = cfg.lower_limit.unwrap_or(nl.a());
    let table = three_term_table_from(nl, cfg.dim, &grid, lower, R2Form::Derived).map_err(Failure::numeric)?;
    for (i, r) in cfg.radii.iter().enumerate() {
        let _ = writeln!(
            s,
            "r={r} U={:.16e} R0={:.16e} R1={:.16e} R2={:.16e}",
            table.u[i], table.r0[i], table.r1[i], table.r2[i]
        );
    }
    let body = csv(|w| table.write_csv(w))?;
    Ok(Outcome { summary: s, table: Some(body), errors: String::new(), code: 0 })
}

fn run_universal(nl: &Nonlinearity) -> Result<Outcome, Failure> {
    let report = classify(nl).map_err(Failure::numeric)?;
    let mut s = String::new();
    let _ = writeln!(s, "verdict={}", report.verdict);
    let _ = writeln!(s, "sampled={}", report.sampled);
    let _ = writeln!(s, "samples={}", report.samples.len());
    if let Some(a) = report.tail_analysis {
        if let Some(e) = a.exponent {
            let _ = writeln!(s, "phi_exponent={e}");
        }
        let limit = match a.limit {
            PhiLimit::Zero => "0".to_string(),
            PhiLimit::Positive(c) => format!("{c:.16e}"),
            PhiLimit::Infinite => "inf".to_string(),
        };
        let _ = writeln!(s, "phi_limit={limit}");
    }
    let code = match report.verdict {
        Verdict::Universal => 0,
        Verdict::NonUniversal => EXIT_NEGATIVE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    let table = csv(|w| report.write_csv(w))?;
    Ok(Outcome { summary: s, table: Some(table), errors: String::new(), code })
}

fn run_compare(nl: &Nonlinearity, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let sol = solve(nl, cfg)?;
    let (_, gaps) = asymptotic_gap(nl, &sol, cfg.k, &cfg.radii, &picard_config(cfg))?;
    let one = verify_one_term(&sol, &cfg.radii).map_err(Failure::numeric)?;
    let mut s = String::new();
    let mut t = String::from("r,u,u_k,u_k1,ratio_k,ratio_k1,u0,gap0,phi_bound,gap0_over_phi\n");
    let _ = writeln!(s, "k={}", cfg.k);
    for (g, o) in gaps.iter().zip(&one.rows) {
        let _ = writeln!(
            s,
            "r={} ratio_k={:.3e} ratio_k1={:.3e} gap0_over_phi={:.6}",
            g.r, g.ratio, g.ratio_next, o.ratio
        );
        let _ = writeln!(
            t,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            g.r, g.u, g.uk, g.uk_next, g.ratio, g.ratio_next, o.u0, o.gap, o.bound, o.ratio
        );
    }
    let _ = writeln!(s, "fitted_c={:.6}", one.fitted_c);
    Ok(Outcome { summary: s, table: Some(t), errors: String::new(), code: 0 })
}

fn run_job(kind: Kind, job: &Job) -> Outcome {
    let result = job
        .cfg
        .nonlinearity()
        .map_err(Failure::usage)
        .and_then(|nl| match kind {
            Kind::Ko => Ok(run_ko(&nl)),
            Kind::Solve => run_solve(&nl, &job.cfg),
            Kind::Picard => run_picard(&nl, &job.cfg),
            Kind::Expand => run_expand(&nl, &job.cfg),
            Kind::Universal => run_universal(&nl),
            Kind::Compare => run_compare(&nl, &job.cfg),
        });
    let mut outcome = match result {
        Ok(o) => o,
        Err(f) => Outcome {
            summary: String::new(),
            table: None,
            errors: format!("error: {}\n", f.message),
            code: f.code,
        },
    };
    if let (Some(path), Some(body)) = (&job.out, &outcome.table) {
        if let Err(e) = write_table(path, kind, &job.cfg, body) {
            outcome.errors += &format!("error: writing {}: {e}\n", path.display());
            outcome.code = outcome.code.max(EXIT_SOFTWARE);
        }
    }
    outcome
}

fn command_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Ko => "ko",
        Kind::Solve => "solve",
        Kind::Picard => "picard",
        Kind::Expand => "expand",
        Kind::Universal => "universal",
        Kind::Compare => "compare",
    }
}

fn write_table(path: &Path, kind: Kind, cfg: &RunConfig, body: &str) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# blowup {VERSION} {}", command_name(kind))?;
    for line in cfg.to_text().lines() {
        writeln!(f, "# {line}")?;
    }
    f.write_all(body.as_bytes())?;
    f.flush()
}

fn load_jobs(cli: &Cli, overrides: &RawConfig) -> Result<Vec<Job>, Failure> {
    let bases = if cli.config.is_empty() {
        vec![(String::from("default"), RawConfig::default())]
    } else {
        cli.config
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
                let raw = RawConfig::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
                let stem = p.file_stem().map_or("job".into(), |s| s.to_string_lossy().into_owned());
                Ok((stem, raw))
            })
            .collect::<Result<Vec<_>, Failure>>()?
    };
    let many = bases.len() > 1;
    bases
        .into_iter()
        .map(|(stem, base)| {
            let cfg = RunConfig::from_raw(&base.merged(overrides)).map_err(Failure::usage)?;
            let out = match (&cli.out, many) {
                (Some(dir), true) => Some(dir.join(format!("{stem}.csv"))),
                (Some(file), false) => Some(file.clone()),
                (None, _) => cfg.out.clone(),
            };
            Ok(Job { cfg, out })
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let (kind, params) = cli.command.split();
    let jobs = match params.overrides().map_err(Failure::usage).and_then(|o| load_jobs(&cli, &o)) {
        Ok(j) => j,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return ExitCode::from(f.code);
        }
    };
    if jobs.len() > 1 {
        if let Some(dir) = &cli.out {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("error: {}: {e}", dir.display());
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }

    let slots: Vec<Mutex<Option<Outcome>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cli.jobs.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(run_job(kind, job));
            });
        }
    });

    // Report in job order regardless of completion order.
    let many = jobs.len() > 1;
    let mut code = 0;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (i, slot) in slots.into_iter().enumerate() {
        let outcome = slot.into_inner().unwrap().expect("every job ran");
        if many {
            let _ = writeln!(out, "[job {i}]");
        }
        let _ = out.write_all(outcome.summary.as_bytes());
        if !outcome.errors.is_empty() {
            let _ = out.flush();
            eprint!("{}", outcome.errors);
        }
        code = code.max(outcome.code);
    }
    ExitCode::from(code)
}
