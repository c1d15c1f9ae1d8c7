//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

mod common;

use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use blowup::expansion::{
    leading_coefficient, power_law_expansion, singular_term_count, ThreeTerm, R2Form,
};
use blowup::nonlinearity::{make_exponential, make_power, Nonlinearity};
use blowup::phase_plane::{pair_gap_estimates, solve_large_solution};
use blowup::picard::{asymptotic_gap, fixed_point, invert_uk, PicardConfig};
use blowup::universality::{classify, tail_analysis, verify_one_term, PhiLimit, Verdict};

type Outcome = Result<String, String>;

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration, what: &str) -> Outcome {
    check(elapsed < budget, format!("{what} {:.3} s (budget {} s)", elapsed.as_secs_f64(), budget.as_secs()))
}

/// `N = 1`: the map is the identity on `v₀`, iterates match the solution
/// and the curvature terms vanish.
fn degenerate_dimension() -> Outcome {
    let t = Instant::now();
    let nl = make_power(3.0).map_err(|e| e.to_string())?;
    let res = fixed_point(&nl, 1, &PicardConfig::default()).map_err(|e| e.to_string())?;
    let identity = res.fixed_point().relative_deviation().iter().all(|y| *y == 0.0);
    if res.converged_at != Some(1) || !identity {
        return Err(format!("converged_at = {:?}, v == v0: {identity}", res.converged_at));
    }
    let sol = solve_large_solution(&nl, 1, 1e-8).map_err(|e| e.to_string())?;
    let radii = [0.99, 0.999, 0.9999];
    let (_, rows) = asymptotic_gap(&nl, &sol, 1, &radii, &PicardConfig::default()).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.ratio.max(r.ratio_next)).fold(0.0, f64::max);
    if worst > 1e-8 {
        return Err(format!("gap ratio {worst:.2e} > 1e-8"));
    }
    let terms = ThreeTerm::new(&nl, 1, 0.0).map_err(|e| e.to_string())?;
    for u in [10.0, 1e3] {
        let (r1, r2) = (terms.r1(u).map_err(|e| e.to_string())?, terms.r2(u).map_err(|e| e.to_string())?);
        if r1 != 0.0 || r2 != 0.0 {
            return Err(format!("R1 = {r1}, R2 = {r2} at U = {u}"));
        }
    }
    let what = format!("converged at 1, gap ratio max {worst:.1e}, R1 = R2 = 0;");
    within(t.elapsed(), Duration::from_secs(1), &what)
}

/// `u(r)(1 − r)² → 6` for `u²`.
fn leading_constant() -> Outcome {
    let nl = make_power(2.0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for dim in [1, 3] {
        let t = Instant::now();
        let sol = solve_large_solution(&nl, dim, 1e-8).map_err(|e| e.to_string())?;
        let d: f64 = 1e-4;
        let c = sol.u_at(1.0 - d).map_err(|e| e.to_string())? * d * d;
        let dt = t.elapsed();
        let ok = (c - 6.0).abs() <= 1e-2 && dt < Duration::from_secs(10);
        let line = format!("N={dim}: u d^2 = {c:.8} in {:.3} s", dt.as_secs_f64());
        if !ok {
            return Err(line);
        }
        parts.push(line);
    }
    Ok(parts.join("; "))
}

/// Second coefficient of `u²`, `N = 3`, from the oracle.
fn second_coefficient() -> Outcome {
    let nl = make_power(2.0).map_err(|e| e.to_string())?;
    let sol = solve_large_solution(&nl, 3, 1e-8).map_err(|e| e.to_string())?;
    let a1 = power_law_expansion(2.0, 3, 2).map_err(|e| e.to_string())?.coeffs[1];
    let d: f64 = 1e-4;
    let measured = (sol.u_at(1.0 - d).map_err(|e| e.to_string())? - 6.0 / (d * d)) * d;
    let rel = (measured / 2.4 - 1.0).abs();
    check(
        rel <= 0.05 && (a1 - 2.4).abs() < 1e-12,
        format!("(u - 6/d^2) d = {measured:.6} at d = 1e-4, series a1 = {a1:.12}, rel. dev. {rel:.2e}"),
    )
}

/// Verdicts on the power family and `e^u`, against the closed-form rule.
fn universality_verdicts() -> Outcome {
    let t = Instant::now();
    let expected = [
        (2.0, Verdict::NonUniversal),
        (3.0, Verdict::NonUniversal),
        (4.0, Verdict::Universal),
        (5.0, Verdict::Universal),
    ];
    let mut got = Vec::new();
    for (p, want) in expected {
        let nl = make_power(p).map_err(|e| e.to_string())?;
        let v = classify(&nl).map_err(|e| e.to_string())?.verdict;
        // Closed form: Φ ~ u^(2 − s/2) with s = p + 1.
        let rule = if p + 1.0 > 4.0 { Verdict::Universal } else { Verdict::NonUniversal };
        let closed = match tail_analysis(&nl).map(|a| a.limit) {
            Some(PhiLimit::Zero) => Verdict::Universal,
            _ => Verdict::NonUniversal,
        };
        if v != want || rule != want || closed != want {
            return Err(format!("p = {p}: classify {v}, rule {rule}, closed form {closed}, expected {want}"));
        }
        got.push(format!("p={p}:{v}"));
    }
    let e = classify(&make_exponential()).map_err(|e| e.to_string())?.verdict;
    if e != Verdict::Universal {
        return Err(format!("e^u: {e}"));
    }
    got.push(format!("exp:{e}"));
    let time = within(t.elapsed(), Duration::from_secs(30), "total")?;
    Ok(format!("{}; {time}", got.join(" ")))
}

/// `|u − u₀|` against `Φ(u)` for `u⁵`, and a persistent gap for `u³`.
fn one_term_rate() -> Outcome {
    let radii: Vec<f64> = log_points(1e-2, 1e-4, 9).iter().map(|d| 1.0 - d).collect();
    let nl = make_power(5.0).map_err(|e| e.to_string())?;
    let sol = solve_large_solution(&nl, 3, 1e-8).map_err(|e| e.to_string())?;
    let table = verify_one_term(&sol, &radii).map_err(|e| e.to_string())?;
    let worst = table.rows.iter().map(|r| r.gap.abs() / r.bound).fold(0.0, f64::max);
    let monotone = table.rows.windows(2).all(|w| w[1].gap.abs() < w[0].gap.abs());
    if worst > 10.0 || !monotone {
        return Err(format!("p=5: max |u-u0|/Phi = {worst:.4}, gap decreasing: {monotone}"));
    }
    let nl3 = make_power(3.0).map_err(|e| e.to_string())?;
    let sol3 = solve_large_solution(&nl3, 3, 1e-8).map_err(|e| e.to_string())?;
    let gap3 = verify_one_term(&sol3, &[1.0 - 1e-4]).map_err(|e| e.to_string())?.rows[0].gap;
    let a1 = power_law_expansion(3.0, 3, 1).map_err(|e| e.to_string())?.coeffs[1];
    check(
        gap3 > 0.5 * a1,
        format!("p=5: max |u-u0|/Phi = {worst:.4} (<= 10), gap decreasing; p=3: gap {gap3:.6} vs 0.5 a1 = {:.6}", 0.5 * a1),
    )
}

/// `g ~ (N − 1)G` and `g = o(F)` at the top of the computed path.
fn error_term_limits() -> Outcome {
    let mut parts = Vec::new();
    for p in [2.0, 3.0] {
        let nl: Nonlinearity = make_power(p).map_err(|e| e.to_string())?;
        for dim in [2, 3] {
            let sol = solve_large_solution(&nl, dim, 1e-8).map_err(|e| e.to_string())?;
            let path = sol.path();
            let u = path.u_max();
            let g = path.g_at(u).map_err(|e| e.to_string())?;
            let ratio = g / ((dim as f64 - 1.0) * nl.big_g(u));
            let g_over_f = g / nl.big_f(u);
            let line = format!("p={p} N={dim}: |g/((N-1)G)-1| = {:.1e}, g/F = {g_over_f:.1e}", (ratio - 1.0).abs());
            if (ratio - 1.0).abs() > 1e-2 || g_over_f > 1e-2 {
                return Err(line);
            }
            parts.push(line);
        }
    }
    Ok(parts.join("; "))
}

/// Two one-dimensional profiles of `u³` with energies 0 and 1.
fn pair_bounds() -> Outcome {
    let nl = make_power(3.0).map_err(|e| e.to_string())?;
    let distances = log_points(1e-2, 1e-4, 9);
    let rep = pair_gap_estimates(&nl, 0.0, 1.0, &distances).map_err(|e| e.to_string())?;
    let bound_ok = rep.rows.iter().all(|r| r.f_diff.abs() <= 1.0 + 1e-8);
    check(
        bound_ok && rep.ratio_spread < 0.2,
        format!("max |F(u1)-F(u2)| = {:.10}, fitted C spread {:.2e} over d in [1e-4, 1e-2]", rep.max_abs_f_diff, rep.ratio_spread),
    )
}

/// Picard fixed point against the oracle profile for `u³`, `N = 3`.
fn fixed_point_vs_oracle() -> Outcome {
    let nl = make_power(3.0).map_err(|e| e.to_string())?;
    let res = fixed_point(&nl, 3, &PicardConfig::default()).map_err(|e| e.to_string())?;
    let sol = solve_large_solution(&nl, 3, 1e-8).map_err(|e| e.to_string())?;
    let v = res.fixed_point();
    let path = sol.path();
    let lo = 10.0 * res.u0;
    let hi = v.grid().umax().min(path.u_max());
    let mut worst: f64 = 0.0;
    for u in log_points(lo, hi, 400) {
        let g = path.g_at(u).map_err(|e| e.to_string())?;
        let exact = (2.0 * (nl.big_f(u) - g)).sqrt();
        worst = worst.max((v.v_at(u) / exact - 1.0).abs());
    }
    check(worst <= 1e-4, format!("sup |v/sqrt(2(F-g)) - 1| = {worst:.2e} on [{lo:.1}, {hi:.2e}]"))
}

/// `(1 − r − R₀ − R₁)/R₂` at `u₂(r)` for `u²`, `N = 3`.
fn three_term_formula() -> Outcome {
    let nl = make_power(2.0).map_err(|e| e.to_string())?;
    let res = fixed_point(&nl, 3, &PicardConfig::default()).map_err(|e| e.to_string())?;
    let v2 = res.iterate(2).ok_or("no second iterate")?;
    let derived = ThreeTerm::new(&nl, 3, nl.a()).map_err(|e| e.to_string())?;
    let uncorrected = ThreeTerm::with_form(&nl, 3, nl.a(), R2Form::Uncorrected).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    let mut uncorrected_ratios = Vec::new();
    for d in [1e-2, 1e-3, 1e-4] {
        let u = invert_uk(v2, 1.0 - d).map_err(|e| e.to_string())?;
        let rest = (d - derived.r0(u).map_err(|e| e.to_string())? - derived.r1(u).map_err(|e| e.to_string())?).abs();
        ratios.push(rest / derived.r2(u).map_err(|e| e.to_string())?);
        uncorrected_ratios.push(rest / uncorrected.r2(u).map_err(|e| e.to_string())?.abs());
    }
    let in_band = (0.5..=1.5).contains(&ratios[1]);
    let toward_one = (ratios[2] - 1.0).abs() < (ratios[1] - 1.0).abs() && (ratios[1] - 1.0).abs() < (ratios[0] - 1.0).abs();
    check(
        in_band && toward_one,
        format!(
            "ratio {:.5}, {:.5}, {:.5} at 1-r = 1e-2, 1e-3, 1e-4 (uncorrected R2: {:.4}, {:.4}, {:.4})",
            ratios[0], ratios[1], ratios[2], uncorrected_ratios[0], uncorrected_ratios[1], uncorrected_ratios[2]
        ),
    )
}

/// Leading coefficients, residual substitution and singular counts.
fn series_engine() -> Outcome {
    let mut worst_a0: f64 = 0.0;
    for p in [1.5, 2.0, 3.0, 5.0, 9.0] {
        let a0 = power_law_expansion(p, 3, 0).map_err(|e| e.to_string())?.coeffs[0];
        let closed = (2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).powf(1.0 / (p - 1.0));
        if (leading_coefficient(p) - closed).abs() > 1e-15 * closed {
            return Err(format!("p = {p}: leading_coefficient disagrees with the closed form"));
        }
        worst_a0 = worst_a0.max((a0 / closed - 1.0).abs());
    }
    if worst_a0 > 1e-12 {
        return Err(format!("a0 rel. error {worst_a0:.2e}"));
    }
    let mut worst_res: f64 = 0.0;
    for &(p, dim, order) in common::SERIES_MATRIX {
        let e = power_law_expansion(p, dim, order).map_err(|e| e.to_string())?;
        let res = common::expansion_residual(p, dim, &e.coeffs);
        worst_res = worst_res.max(res.iter().fold(0.0, |m, r| m.max(r.abs())));
    }
    if worst_res > 1e-12 {
        return Err(format!("residual {worst_res:.2e} through the kept order"));
    }
    let mut runner = TestRunner::deterministic();
    let strategy = 1.01f64..20.0;
    for _ in 0..20 {
        let p = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let want = (2.0 / (p - 1.0)).floor() as usize + 1;
        if singular_term_count(p).map_err(|e| e.to_string())? != want {
            return Err(format!("singular_term_count({p}) != {want}"));
        }
    }
    Ok(format!(
        "a0 rel. error {worst_a0:.1e}, residual {worst_res:.1e} over {} (p, N) cases, 20 singular counts",
        common::SERIES_MATRIX.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("N=1 degeneracy", degenerate_dimension),
        ("leading constant u^2", leading_constant),
        ("second coefficient u^2, N=3", second_coefficient),
        ("universality verdicts", universality_verdicts),
        ("one-term rate", one_term_rate),
        ("error-term limits", error_term_limits),
        ("pair bounds u^3, N=1", pair_bounds),
        ("fixed point vs oracle", fixed_point_vs_oracle),
        ("three-term formula", three_term_formula),
        ("series engine", series_engine),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
