//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails. Run with `cargo test -p qpseries --test acceptance`.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use qpseries::fourier::{FourierSeries, Mode};
use qpseries::frequency::{alpha_n, DEFAULT_LATTICE_BUDGET};
use qpseries::model::fixtures::{e1, e2, e3, GOLDEN};
use qpseries::solver::degenerate::{self, counterterm_b, divisor_v, solve_zeta, x1_coefficients};
use qpseries::solver::nondegenerate::{self, check_envelope, propagator_d};
use qpseries::trees::{check_lemmas, oracle_compare, Scheme, DEFAULT_TREE_BUDGET, ORACLE_TOL};
use qpseries::verify::{attractor_test, residual, ATTRACT_TOL, DEFAULT_T_END};
use qpseries::{FrequencyVector, Problem, SolverRegistry};

const EPS: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn c1_oracle_n1() -> Outcome {
    let start = Instant::now();
    let p = e1(EPS);
    let sol = nondegenerate::solve(&p, 5).unwrap();
    let rep = oracle_compare(&p, &sol, 5, DEFAULT_TREE_BUDGET).unwrap();
    let t = start.elapsed();
    outcome(
        rep.pass && t <= Duration::from_secs(60),
        format!("max rel error {:.3e} (tol {ORACLE_TOL:e}), {} trees, {:.2?}", rep.max_rel_error, rep.trees_enumerated, t),
    )
}

fn c2_oracle_n3() -> Outcome {
    let p = e3(EPS);
    let st = solve_zeta(&p, 5).unwrap();
    let sol = degenerate::assemble(&p, &st, 5);
    let rep = oracle_compare(&p, &sol, 5, DEFAULT_TREE_BUDGET).unwrap();
    outcome(
        rep.pass,
        format!("ζ = {:e}, max rel error {:.3e} over {} coefficients", st.zeta, rep.max_rel_error, rep.entries.len()),
    )
}

fn c3_exact_vanishing() -> Outcome {
    let sol = nondegenerate::solve(&e1(EPS), 4).unwrap();
    let u1_zero = sol.coefficient(1).get(&Mode(vec![0]));
    let u2_empty = sol.coefficient(2).is_empty();
    let st = solve_zeta(&e3(EPS), 5).unwrap();
    let xi_empty = st.xi(2).is_empty() && st.xi(3).is_empty();
    outcome(
        u1_zero == Complex64::new(0.0, 0.0) && u2_empty && xi_empty,
        format!("u(1)_0 = {u1_zero}, u(2) empty: {u2_empty}, ξ[2], ξ[3] empty: {xi_empty}"),
    )
}

fn c4_closed_forms() -> Outcome {
    let sol = nondegenerate::solve(&e1(EPS), 3).unwrap();
    let i = Complex64::i();
    let checks = [
        (sol.coefficient(1).get(&Mode(vec![1])), -i * EPS / 2.0),
        (sol.coefficient(3).get(&Mode(vec![0])), Complex64::new(-EPS * EPS / 2.0, 0.0)),
        (
            sol.coefficient(3).get(&Mode(vec![2])),
            Complex64::new(EPS.powi(3), 0.0) / (4.0 * (2.0 * i - 3.0 * EPS)),
        ),
    ];
    let worst = checks.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max);
    outcome(worst <= 1e-13, format!("max rel error {worst:.3e} (tol 1e-13)"))
}

fn c5_scaling() -> Outcome {
    let p = e1(EPS);
    let sol = nondegenerate::solve(&p, 6).unwrap();
    let n1 = check_envelope(&p, &sol);
    let n3 = degenerate::check_scaling(&e3(EPS), 6).unwrap();
    let n1_detail = match &n1 {
        Ok(env) => format!("worst ratio/bound {:.3} over {} coefficients", env.worst_scaling_ratio, env.checked_coefficients),
        Err(e) => e.to_string(),
    };
    let n3_worst = n3.rows.iter().map(|r| r.ratio / r.bound).fold(0.0, f64::max);
    outcome(
        n1.is_ok() && n3.pass(),
        format!("n1: {n1_detail} (slack 1.2); n3: worst ratio/bound {n3_worst:.3} over k = {:?} (slack 1.25)",
            n3.rows.iter().map(|r| r.k).collect::<Vec<_>>()),
    )
}

fn c6_propagator_bounds() -> Outcome {
    let mut violations = 0;
    let mut points = 0;
    for &eps in &[1e-3, 1e-2, 0.05, 0.1] {
        let b = counterterm_b(&e3(eps), &x1_coefficients(&e3(eps)).unwrap(), 0.0).b;
        for i in -1000..=1000 {
            let s = i as f64 * 0.01;
            points += 2;
            if propagator_d(eps, s, 1.0).norm() < s.abs().max(eps) {
                violations += 1;
            }
            if divisor_v(eps, s, b, 3).norm() < s.abs().max((b * eps.powi(3)).abs()) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over {points} grid points"))
}

fn golden_cubic() -> Problem {
    let omega = FrequencyVector::new(vec![1.0, GOLDEN]).unwrap();
    let f = FourierSeries::cosine(Mode(vec![1, 0]), 1.0)
        .add(&FourierSeries::cosine(Mode(vec![0, 1]), 1.0))
        .unwrap();
    Problem::new(omega, f, vec![0.0, 0.0, 0.0, 1.0], 0.0, EPS).unwrap()
}

fn near_resonant_cubic() -> Problem {
    // (3,−2)·ω is far below α/2, so small-divisor lines occur at order 7
    let omega = FrequencyVector::new(vec![1.0, 1.51]).unwrap();
    let f = FourierSeries::cosine(Mode(vec![1, 0]), 1.0)
        .add(&FourierSeries::cosine(Mode(vec![0, 1]), 1.0))
        .unwrap();
    Problem::new(omega, f, vec![0.0, 0.0, 0.0, 1.0], 0.0, EPS).unwrap()
}

fn c7_lemmas() -> Outcome {
    let start = Instant::now();
    let runs = [
        ("E1", check_lemmas(&e1(EPS), Scheme::N1, 7, DEFAULT_TREE_BUDGET).unwrap()),
        ("E2", check_lemmas(&e2(EPS), Scheme::N1, 7, DEFAULT_TREE_BUDGET).unwrap()),
        ("E3", check_lemmas(&e3(EPS), Scheme::N3, 3 + 4, DEFAULT_TREE_BUDGET).unwrap()),
        ("golden cubic", check_lemmas(&golden_cubic(), Scheme::N3, 3 + 4, DEFAULT_TREE_BUDGET).unwrap()),
        ("near-resonant cubic", check_lemmas(&near_resonant_cubic(), Scheme::N3, 3 + 4, DEFAULT_TREE_BUDGET).unwrap()),
    ];
    let t = start.elapsed();
    let violations: usize = runs.iter().map(|(_, r)| r.total_violations()).sum();
    let trees: usize = runs.iter().map(|(_, r)| r.trees_checked).sum();
    let small: usize = runs.iter().map(|(_, r)| r.trees_with_small_divisors).sum();
    outcome(
        violations == 0 && t <= Duration::from_secs(300),
        format!("{violations} violations over {trees} trees ({small} with small-divisor nodes), {t:.2?}"),
    )
}

fn c8_residual() -> Outcome {
    let reg = SolverRegistry::default();
    let p1 = e1(EPS);
    let r = |p: &Problem, k| residual(p, &reg.solve(p, "auto", k).unwrap()).unwrap().sup_residual;
    let (e1_4, e1_8) = (r(&p1, 4), r(&p1, 8));
    let p3 = e3(EPS);
    let (e3_4, e3_8) = (r(&p3, 4), r(&p3, 8));
    outcome(
        e1_8 <= 1e-9 && e1_8 < e1_4 && e3_8 < e3_4,
        format!("E1: K=8 {e1_8:.3e} (bound 1e-9), K=4 {e1_4:.3e}; E3: K=8 {e3_8:.3e}, K=4 {e3_4:.3e}"),
    )
}

fn c9_counterterm() -> Outcome {
    let mut worst_b = 0.0f64;
    for &eps in &[0.0, 0.01, 0.05, 0.1] {
        let p = e3(eps);
        let b = counterterm_b(&p, &x1_coefficients(&p).unwrap(), 0.0).b;
        let exact = 3.0 / (2.0 * (1.0 + eps * eps));
        worst_b = worst_b.max((b - exact).abs() / exact);
    }
    let zeta = solve_zeta(&e3(0.01), 8).unwrap().zeta;
    // nonzero root: shifted forcing average and a quintic tail
    let omega = FrequencyVector::new(vec![1.0, GOLDEN]).unwrap();
    let f = FourierSeries::cosine(Mode(vec![1, 0]), 1.0)
        .add(&FourierSeries::sine(Mode(vec![0, 1]), 0.6))
        .unwrap()
        .add(&FourierSeries::cosine(Mode(vec![1, 1]), 0.4))
        .unwrap();
    let rich = Problem::new(omega, f, vec![0.0, 0.0, 0.0, 1.0, 0.7, 0.3], 0.0, EPS).unwrap();
    let mut worst_slope = 0.0f64;
    for p in [e3(0.01), rich] {
        let st = solve_zeta(&p, 8).unwrap();
        worst_slope = worst_slope.max((st.fbar_slope - st.b0_over_a).abs() / st.b0_over_a.abs());
    }
    outcome(
        worst_b <= 1e-13 && zeta.abs() <= 1e-3 && worst_slope <= 1e-10,
        format!("b rel error {worst_b:.3e}, |ζ(0.01)| = {:.3e}, dF̄₂/dζ vs b₀/a rel {worst_slope:.3e}", zeta.abs()),
    )
}

fn c10_attractivity() -> Outcome {
    let offsets = [0.01, 0.05, 0.1];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest = Duration::ZERO;
    for (name, p) in [("E1", e1(EPS)), ("E2", e2(EPS))] {
        let sol = SolverRegistry::default().solve(&p, "n1", 8).unwrap();
        let start = Instant::now();
        let rep = attractor_test(&p, &sol, &offsets, DEFAULT_T_END, None).unwrap();
        slowest = slowest.max(start.elapsed() / (offsets.len() as u32 + 1));
        pass &= rep.pass;
        let worst = rep.entries.iter().map(|e| e.terminal_distance).fold(0.0, f64::max);
        let rate = rep.entries.iter().filter_map(|e| e.decay_rate).fold(f64::INFINITY, f64::min);
        parts.push(format!("{name}: worst distance {worst:.3e} at t={DEFAULT_T_END}, decay rate {rate:.4}"));
    }
    pass &= slowest <= Duration::from_secs(120);
    outcome(pass, format!("{} (tol {ATTRACT_TOL:e}), {slowest:.2?} per trajectory", parts.join("; ")))
}

fn c11_diophantine() -> Outcome {
    let omega = FrequencyVector::new(vec![1.0, GOLDEN]).unwrap();
    let mut worst = 0.0f64;
    let mut got = Vec::new();
    for n in 1..=4u32 {
        let a = alpha_n(&omega, n, DEFAULT_LATTICE_BUDGET).unwrap();
        worst = worst.max((a - GOLDEN.powi(-(n as i32))).abs());
        got.push(format!("{a:.12}"));
    }
    outcome(
        worst <= 1e-12,
        format!("α₁..α₄ = [{}], expected φ⁻¹..φ⁻⁴, max error {worst:.3e}", got.join(", ")),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle equivalence, n = 1", c1_oracle_n1),
        ("oracle equivalence, n = 3", c2_oracle_n3),
        ("exact vanishing", c3_exact_vanishing),
        ("closed-form spot checks", c4_closed_forms),
        ("epsilon scaling", c5_scaling),
        ("propagator lower bounds", c6_propagator_bounds),
        ("combinatorial lemmas", c7_lemmas),
        ("residual", c8_residual),
        ("counterterm and zeta", c9_counterterm),
        ("attractivity", c10_attractivity),
        ("diophantine diagnostics", c11_diophantine),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
