mod common;

use proptest::prelude::*;

use blowup::expansion::{power_law_expansion, singular_term_count, three_term_table_from, R2Form};
use blowup::nonlinearity::{keller_osserman, make_exponential, make_power, KoVerdict};
use blowup::numerics::invert_monotone;
use blowup::phase_plane::solve_large_solution;
use blowup::picard::{fixed_point, PicardConfig};
use blowup::series::{PuiseuxSeries, Variable};
use blowup::universality::{classify, tail_analysis, verify_one_term, PhiLimit, Verdict};

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn series_times_reciprocal_is_one(
        alpha in -3.0f64..3.0,
        delta in prop::sample::select(vec![0.25, 0.5, 1.0, 1.5]),
        c0 in prop::sample::select(vec![-1.0, 1.0]).prop_flat_map(|s| (0.5f64..2.0).prop_map(move |m| s * m)),
        tail in prop::collection::vec(-2.0f64..2.0, 0..8),
    ) {
        let mut coeffs = vec![c0];
        coeffs.extend(tail);
        let s = PuiseuxSeries::new(alpha, delta, coeffs, Variable::UInverse).unwrap();
        let one = s.mul(&s.recip().unwrap()).unwrap();
        prop_assert!(one.alpha().abs() < 1e-12);
        prop_assert_eq!(one.len(), s.len());
        for (k, c) in one.coeffs().iter().enumerate() {
            let expect = if k == 0 { 1.0 } else { 0.0 };
            prop_assert!((c - expect).abs() < 1e-9, "coefficient {} = {}", k, c);
        }
    }

    #[test]
    fn half_angle_identity(x in 0.0f64..=1.0) {
        let s = (1.0 - x).sqrt();
        let lhs = 1.0 - s;
        let rhs = x / (1.0 + s);
        // The left side cancels for small x, so compare absolutely.
        prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON);
        prop_assert!(rhs <= x);
        prop_assert!(rhs >= 0.5 * x);
    }

    #[test]
    fn inversion_recovers_monotone_functions(
        a in 0.01f64..5.0,
        b in 0.0f64..5.0,
        c in 0.0f64..5.0,
        x in -10.0f64..10.0,
    ) {
        let h = |t: f64| a * t + b * t.atan() + c * t * t * t;
        let target = h(x);
        let tol = 1e-10 * (1.0 + target.abs());
        let got = invert_monotone(&h, target, (0.0, 1.0), tol).unwrap();
        prop_assert!((h(got) - target).abs() <= tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn singular_count_formula(p in 1.01f64..20.0) {
        prop_assert_eq!(singular_term_count(p).unwrap(), (2.0 / (p - 1.0)).floor() as usize + 1);
    }

    #[test]
    fn power_nonlinearity_invariants(p in 1.05f64..12.0) {
        let nl = make_power(p).unwrap();
        prop_assert_eq!(nl.big_f(nl.a()), 0.0);
        let cutoff = nl.tail().cutoff;
        let grid = log_grid(nl.a() + 1.0, 10.0 * cutoff.max(nl.a() + 1.0) * 10.0, 100);
        prop_assert!(grid.windows(2).all(|w| nl.big_f(w[1]) >= nl.big_f(w[0])));
        prop_assert!(nl.check_derivative(&grid, 1e-6).is_ok());
        for u in log_grid(cutoff, 1e6 * cutoff, 40) {
            prop_assert!((nl.big_f(u) * (p + 1.0) / u.powf(p + 1.0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn picard_iterates_stay_in_ball_and_bracket(p in 2.0f64..8.0, dim in 2usize..5) {
        let nl = make_power(p).unwrap();
        let cfg = PicardConfig::default();
        let res = fixed_point(&nl, dim, &cfg).unwrap();
        prop_assert!(res.converged_at.is_some());
        for it in &res.iterates {
            prop_assert!(it.ball_norm() <= cfg.rho);
        }
        // v ≤ v₀ everywhere; v₁ ≤ v away from U0. Just above U0 the order
        // flips, since r < r₀ there while v = v₀ at U0 itself.
        let v1 = res.iterate(1).unwrap().relative_deviation();
        let v = res.fixed_point().relative_deviation();
        let nodes = res.fixed_point().grid().nodes();
        for ((a, b), u) in v1.iter().zip(v).zip(nodes) {
            prop_assert!(*b <= 1e-12);
            if *u >= 1.5 * res.u0 {
                prop_assert!(*a <= *b + 1e-12, "v1 > v at u = {}", u);
            }
        }
    }
}

#[test]
fn ko_rule_for_powers() {
    for p in [1.5, 2.0, 3.0, 10.0] {
        assert_eq!(keller_osserman(&make_power(p).unwrap()).verdict, KoVerdict::Holds);
    }
    // p ≤ 1 lies outside the family, consistent with KO failing there.
    for p in [0.5, 1.0] {
        assert!(make_power(p).is_err());
    }
}

#[test]
fn expansion_residual_order() {
    for &(p, dim, order) in common::SERIES_MATRIX {
        let e = power_law_expansion(p, dim, order).unwrap();
        let res = common::expansion_residual(p, dim, &e.coeffs);
        assert_eq!(res.len(), e.coeffs.len());
        for (k, r) in res.iter().enumerate() {
            assert!(r.abs() < 1e-12, "p={p} N={dim}: residual at index {k} is {r}");
        }
        // A perturbed last coefficient must show up at the last index.
        let mut bad = e.coeffs.clone();
        *bad.last_mut().unwrap() += 1e-3;
        let res = common::expansion_residual(p, dim, &bad);
        assert!(res.last().unwrap().abs() > 1e-6, "p={p} N={dim}: residual blind to the last term");
        // Terms beyond the singular ones carry positive exponents.
        let k_sing = singular_term_count(p).unwrap() - 1;
        for k in k_sing + 1..e.coeffs.len() {
            assert!(e.exponent(k) > 0.0);
        }
    }
}

#[test]
fn three_terms_positive_and_decreasing() {
    for p in [2.0, 3.0, 5.0] {
        let nl = make_power(p).unwrap();
        let grid = log_grid(10.0, 1e4, 13);
        let t = three_term_table_from(&nl, 3, &grid, nl.a(), R2Form::Derived).unwrap();
        for col in [&t.r0, &t.r1, &t.r2] {
            assert!(col.iter().all(|v| *v > 0.0), "p={p}: {col:?}");
            assert!(col.windows(2).all(|w| w[1] < w[0]), "p={p}: {col:?}");
        }
    }
}

#[test]
fn lower_limit_change_is_higher_order() {
    let nl = make_power(2.0).unwrap();
    let grid = [10.0, 1e3];
    let at_a = three_term_table_from(&nl, 3, &grid, 0.0, R2Form::Derived).unwrap();
    let at_1 = three_term_table_from(&nl, 3, &grid, 1.0, R2Form::Derived).unwrap();
    for (x, y) in [(&at_a.r1, &at_1.r1), (&at_a.r2, &at_1.r2)] {
        let rel: Vec<f64> = x.iter().zip(y.iter()).map(|(x, y)| (x - y).abs() / x.abs()).collect();
        assert!(rel[1] < 0.1 * rel[0], "{rel:?}");
    }
}

#[test]
fn classifier_matches_closed_form() {
    for s in [3.0, 3.9, 4.0, 4.1, 6.0, 10.0] {
        let nl = make_power(s - 1.0).unwrap();
        let report = classify(&nl).unwrap();
        let closed = match tail_analysis(&nl).unwrap().limit {
            PhiLimit::Zero => Verdict::Universal,
            PhiLimit::Positive(_) | PhiLimit::Infinite => Verdict::NonUniversal,
        };
        assert_eq!(report.sampled, closed, "s = {s}");
        assert_eq!(report.verdict, closed, "s = {s}");
    }
}

#[test]
fn classifier_agrees_with_measured_gap() {
    let radii = [0.99, 0.999, 0.9999];
    for p in [2.0, 3.0, 4.0, 5.0] {
        let nl = make_power(p).unwrap();
        let sol = solve_large_solution(&nl, 3, 1e-8).unwrap();
        let table = verify_one_term(&sol, &radii).unwrap();
        let first = table.rows[0].gap.abs();
        let last = table.rows[2].gap.abs();
        let vanishing = last < 0.5 * first;
        let universal = classify(&nl).unwrap().verdict == Verdict::Universal;
        assert_eq!(vanishing, universal, "p = {p}: gaps {first} → {last}");
    }
}

#[test]
fn radial_solution_invariants() {
    for p in [2.0, 3.0, 5.0] {
        let nl = make_power(p).unwrap();
        for dim in [2, 3, 5] {
            let sol = solve_large_solution(&nl, dim, 1e-8).unwrap();
            assert!(sol.ode_residual() <= 1e-6, "p={p} N={dim}: residual {}", sol.ode_residual());
            assert!(sol.overlap_rel_diff() <= 1e-8, "p={p} N={dim}: overlap {}", sol.overlap_rel_diff());
            let h = sol.shooting_history();
            assert!(h.windows(2).all(|w| w[1].1 < w[0].1), "p={p} N={dim}: shooting not monotone");
            let path = sol.path();
            let u = path.u_max();
            let ratio = path.g_at(u).unwrap() / ((dim as f64 - 1.0) * nl.big_g(u));
            assert!((0.9..=1.1).contains(&ratio), "p={p} N={dim}: g/((N-1)G) = {ratio}");
            let us: Vec<f64> = [0.5, 0.9, 0.99, 0.999].iter().map(|&r| sol.u_at(r).unwrap()).collect();
            assert!(us.windows(2).all(|w| w[1] > w[0]));
        }
    }
}

#[test]
fn picard_grid_refinement_and_contraction() {
    let nl = make_power(3.0).unwrap();
    let coarse = fixed_point(&nl, 3, &PicardConfig::default()).unwrap();
    let fine = fixed_point(&nl, 3, &PicardConfig { density: 100.0, ..PicardConfig::default() }).unwrap();
    let (a, b) = (coarse.fixed_point(), fine.fixed_point());
    let top = a.grid().umax().min(b.grid().umax());
    let mut worst: f64 = 0.0;
    for u in log_grid(a.grid().u0(), top, 200) {
        worst = worst.max((a.ratio_at(u) - b.ratio_at(u)).abs());
    }
    assert!(worst < 1e-6, "refinement moved the fixed point by {worst}");
    assert!(coarse.contraction.iter().all(|k| *k < 1.0), "{:?}", coarse.contraction);
}

#[test]
fn deterministic_results() {
    let nl = make_power(3.0).unwrap();
    let cfg = PicardConfig::default();
    let mut a = Vec::new();
    let mut b = Vec::new();
    fixed_point(&nl, 3, &cfg).unwrap().write_csv(&mut a).unwrap();
    fixed_point(&nl, 3, &cfg).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let e = make_exponential();
    assert_eq!(classify(&e).unwrap(), classify(&e).unwrap());
}
