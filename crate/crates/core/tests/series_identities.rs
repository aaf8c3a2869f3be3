use num_complex::Complex64;
use proptest::prelude::*;
use qpseries::fourier::{FourierSeries, Mode, REALITY_TOL};
use qpseries::model::fixtures::{e1, e2, e3, GOLDEN};
use qpseries::solver::degenerate::{self, solve_zeta};
use qpseries::solver::nondegenerate::{self, propagator_d};
use qpseries::trees::{oracle_compare, DEFAULT_TREE_BUDGET};
use qpseries::verify::residual_series;
use qpseries::{Error, FrequencyVector, Problem, ResponseSolver, Result, SeriesSolution, SolverRegistry};

/// Product of two μ-polynomials with series coefficients, truncated at `deg`.
fn mul_trunc(a: &[FourierSeries], b: &[FourierSeries], deg: usize, dim: usize) -> Vec<FourierSeries> {
    let mut out = vec![FourierSeries::zero(dim); deg + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j <= deg && !x.is_empty() && !y.is_empty() {
                out[i + j].add_assign(&x.convolve(y).unwrap()).unwrap();
            }
        }
    }
    out
}

/// Coefficients in μ of `G(U) = Σ_{p≥2} a_p U^p` with `U = Σ_k μ^k u^{(k)}`.
fn g_of_u(problem: &Problem, sol: &SeriesSolution, deg: usize) -> Vec<FourierSeries> {
    let dim = problem.dim();
    let mut u = vec![FourierSeries::zero(dim)];
    u.extend(sol.orders.iter().cloned());
    u.truncate(deg + 1);
    let mut power = u.clone();
    let mut acc = vec![FourierSeries::zero(dim); deg + 1];
    for p in 2..=problem.nonlinearity.degree() {
        power = mul_trunc(&power, &u, deg, dim);
        let ap = problem.nonlinearity.a_p(p);
        for (k, s) in power.iter().enumerate() {
            acc[k].add_assign(&s.scale_real(ap)).unwrap();
        }
    }
    acc
}

#[test]
fn n1_equation_holds_order_by_order_in_mu() {
    for p in [e1(0.05), e2(0.05), e1(0.3)] {
        let k_max = 7;
        let sol = nondegenerate::solve(&p, k_max).unwrap();
        let g = g_of_u(&p, &sol, k_max);
        let eps = p.epsilon;
        for k in 1..=k_max {
            // D u^{(k)} = ε f̃ δ_{k1} − ε [G(U)]^{(k−1)}
            let mut lhs = FourierSeries::zero(p.dim());
            for (nu, c) in sol.coefficient(k).iter() {
                lhs.set(nu.clone(), c * propagator_d(eps, p.omega.dot(nu), p.nonlinearity.a));
            }
            let mut rhs = g[k - 1].scale_real(-eps);
            if k == 1 {
                rhs.add_assign(&p.forcing_tilde().scale_real(eps)).unwrap();
            }
            let diff = lhs.sub(&rhs).unwrap();
            let scale = rhs.sup_norm().max(lhs.sup_norm()).max(1e-300);
            assert!(diff.sup_norm() <= 1e-13 * scale, "k={k} diff={:e}", diff.sup_norm());
        }
    }
}

#[test]
fn n3_average_of_residual_vanishes_at_solved_zeta() {
    let omega = FrequencyVector::new(vec![1.0, GOLDEN]).unwrap();
    let f = FourierSeries::cosine(Mode(vec![1, 0]), 1.0)
        .add(&FourierSeries::sine(Mode(vec![0, 1]), 0.6))
        .unwrap();
    let rich = Problem::new(omega, f, vec![0.0, 0.0, 0.0, 1.0, 0.7, 0.3], 0.0, 0.05).unwrap();
    for p in [e3(0.05), rich] {
        let st = solve_zeta(&p, 8).unwrap();
        let sol = degenerate::assemble(&p, &st, 8);
        let r = residual_series(&p, &sol).unwrap();
        // [R]₀ = ε a ε^𝔫 F₂(ζ)
        let n = p.nonlinearity.order as i32;
        let bound = p.epsilon.powi(n + 1) * p.nonlinearity.a.abs() * st.tolerance * 1.01;
        assert!(r.average().norm() <= bound, "{:e} > {bound:e}", r.average().norm());
    }
}

#[test]
fn n3_nonzero_modes_refine_with_order() {
    let p = e3(0.05);
    let r = |k| residual_series(&p, &SolverRegistry::default().solve(&p, "n3", k).unwrap()).unwrap().sup_norm();
    assert!(r(8) < r(4) && r(4) < r(3));
}

struct Zero;

impl ResponseSolver for Zero {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn description(&self) -> &'static str {
        "u ≡ 0"
    }

    fn supports(&self, _: &Problem) -> bool {
        true
    }

    fn solve(&self, problem: &Problem, order: usize) -> Result<SeriesSolution> {
        Ok(SeriesSolution::new("zero", problem, vec![FourierSeries::zero(problem.dim()); order]))
    }
}

#[test]
fn registry_accepts_new_strategies() {
    let mut reg = SolverRegistry::default();
    reg.register(Box::new(Zero));
    assert_eq!(reg.names().collect::<Vec<_>>(), vec!["n1", "n3", "zero"]);
    // auto keeps picking the first supporting solver by name
    assert_eq!(reg.select(&e1(0.1), "auto").unwrap().name(), "n1");
    assert!(reg.solve(&e1(0.1), "zero", 3).unwrap().total().is_empty());
    let empty = SolverRegistry::empty();
    assert!(matches!(empty.select(&e1(0.1), "auto"), Err(Error::UnknownSolver(_))));
}

fn real_forcing(dim: usize) -> impl Strategy<Value = FourierSeries> {
    let mode = proptest::collection::vec(-1i32..=1, dim);
    proptest::collection::vec((mode, -1.0f64..1.0, -1.0f64..1.0), 1..3).prop_map(move |terms| {
        let mut f = FourierSeries::zero(dim);
        for (m, re, im) in terms {
            let m = Mode(m);
            if m.is_zero() {
                continue;
            }
            f = f.add(&FourierSeries::cosine(m.clone(), re)).unwrap();
            f = f.add(&FourierSeries::sine(m, im)).unwrap();
        }
        f
    })
}

fn omega(dim: usize) -> FrequencyVector {
    FrequencyVector::new(if dim == 1 { vec![1.0] } else { vec![1.0, GOLDEN] }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn n1_recursion_equals_tree_sum(
        dim in 1usize..=2,
        a in 0.5f64..2.0,
        a2 in -1.0f64..1.0,
        a3 in -1.0f64..1.0,
        eps in 0.01f64..0.2,
        seed in real_forcing(2),
    ) {
        let f = if dim == 2 { seed } else {
            FourierSeries::from_pairs(1, true, seed.iter().filter(|(m, _)| m.0[1] == 0).map(|(m, c)| (Mode(vec![m.0[0]]), *c))).unwrap()
        };
        prop_assume!(!f.is_empty());
        let p = Problem::new(omega(dim), f, vec![0.0, a, a2, a3], 0.0, eps).unwrap();
        let sol = nondegenerate::solve(&p, 5).unwrap();
        for k in 1..=5 {
            let u = sol.coefficient(k);
            prop_assert!(u.is_conjugate_symmetric(REALITY_TOL * u.sup_norm().max(1.0)));
            prop_assert!(u.max_l1() <= k as u64 * p.forcing.max_l1());
        }
        let rep = oracle_compare(&p, &sol, 5, DEFAULT_TREE_BUDGET).unwrap();
        prop_assert!(rep.pass, "{:e}", rep.max_rel_error);
    }

    #[test]
    fn n3_zeta_solve_and_derivative_identity(
        a in 0.5f64..2.0,
        a5 in -0.5f64..0.5,
        eps in 0.005f64..0.05,
        f in real_forcing(2),
        c0 in -0.3f64..0.3,
    ) {
        let mut f = f;
        let poly_at_zero = [0.0, 0.0, 0.0, a, 0.0, a5];
        // g(x) = a (x − c₀)³ + a5 (x − c₀)⁵ + f₀ in powers of x, so g(c₀) = f₀
        let mut poly = vec![0.0; 6];
        for (p, &coef) in poly_at_zero.iter().enumerate() {
            for j in 0..=p {
                let binom = (0..j).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64);
                poly[p - j] += coef * binom * (-c0).powi(j as i32);
            }
        }
        let f0 = 0.2;
        poly[0] += f0;
        f.add_at(Mode::zero(2), Complex64::new(f0, 0.0));
        prop_assume!(f.len() > 1);
        let p = Problem::new(omega(2), f, poly, c0, eps).unwrap();
        prop_assert_eq!(p.nonlinearity.order, 3);
        let st = solve_zeta(&p, 6).unwrap();
        prop_assert!(st.f2_residual.abs() <= st.tolerance);
        prop_assert!((st.fbar_slope - st.b0_over_a).abs() <= 1e-10 * st.b0_over_a.abs().max(1.0));
        for xi in &st.xi_orders {
            prop_assert!(!xi.contains(&Mode::zero(2)));
        }
        prop_assert!(st.xi(2).is_empty() && st.xi(3).is_empty());
    }
}
