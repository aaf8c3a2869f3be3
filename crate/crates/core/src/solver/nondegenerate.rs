//! Simple-zero pipeline (`𝔫 = 1`).
//!
//! With `x = c₀ + u` and the bookkeeping parameter `μ` multiplying both the
//! nonlinear tail `G(x) = Σ_{p≥2} a_p x^p` and the forcing, the coefficients
//! of `u = Σ_k μ^k u^{(k)}` obey
//!
//! ```text
//! D(ε, ω·ν) u^{(1)}_ν = ε f_ν                                         (ν ≠ 0)
//! D(ε, ω·ν) u^{(k)}_ν = −ε Σ_p a_p Σ_{k₁+…+k_p=k−1} [u^{(k₁)}⊛…⊛u^{(k_p)}]_ν
//!         a u^{(k)}_0 = −  Σ_p a_p Σ_{k₁+…+k_p=k−1} [u^{(k₁)}⊛…⊛u^{(k_p)}]_0
//! ```
//!
//! with `D(ε, s) = −εs² + is + εa` and the inner sums over ordered tuples.

use num_complex::Complex64;
use serde::Serialize;

use super::{checked_inverse, CompositionTable, ResponseSolver, SeriesSolution};
use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Mode};
use crate::model::Problem;

/// Slack on the per-order `ε → ε/2` ratio bound.
pub const SCALING_SLACK: f64 = 1.2;

/// `D(ε, s) = −εs² + is + εa`.
pub fn propagator_d(epsilon: f64, s: f64, a: f64) -> Complex64 {
    Complex64::new(epsilon * a - epsilon * s * s, s)
}

/// `u^{(1)}`.
pub fn first_order(problem: &Problem) -> Result<FourierSeries> {
    let eps = problem.epsilon;
    let a = problem.nonlinearity.a;
    let mut u = FourierSeries::zero(problem.dim());
    for (nu, f) in problem.forcing.iter() {
        if nu.is_zero() {
            continue;
        }
        let inv = checked_inverse(propagator_d(eps, problem.omega.dot(nu), a), nu)?;
        u.set(nu.clone(), f * eps * inv);
    }
    Ok(u)
}

/// `u^{(k)}` for `k ≥ 2` from `lower = [u^{(1)}, …, u^{(k−1)}]`.
pub fn recursion_step(problem: &Problem, lower: &[FourierSeries], k: usize) -> Result<FourierSeries> {
    if k < 2 || lower.len() < k - 1 {
        return Err(Error::InvalidInput(format!(
            "recursion step k={k} needs orders 1..{} (have {})",
            k.saturating_sub(1),
            lower.len()
        )));
    }
    let nl = &problem.nonlinearity;
    if nl.a.abs() == 0.0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let dim = problem.dim();
    let m = k - 1;
    let max_power = nl.degree().min(m);
    let table = CompositionTable::build(dim, &lower[..m], max_power, m);

    let mut rhs = FourierSeries::zero(dim);
    for p in 2..=max_power {
        let ap = nl.a_p(p);
        if ap == 0.0 {
            continue;
        }
        rhs.add_assign(&table.get(p, m).scale_real(ap))?;
    }

    let eps = problem.epsilon;
    let mut out = FourierSeries::zero(dim);
    for (nu, s) in rhs.iter() {
        let value = if nu.is_zero() {
            -s / nl.a
        } else {
            let inv = checked_inverse(propagator_d(eps, problem.omega.dot(nu), nl.a), nu)?;
            -s * eps * inv
        };
        out.set(nu.clone(), value);
    }
    out.set_declared_real(true);
    Ok(out)
}

/// Orders `1..=order` summed at `μ = 1`.
pub fn solve(problem: &Problem, order: usize) -> Result<SeriesSolution> {
    if order == 0 {
        return Err(Error::InvalidInput("truncation order must be at least 1".into()));
    }
    if problem.nonlinearity.order != 1 {
        return Err(Error::InvalidInput("the simple-zero pipeline needs a zero of order 1".into()));
    }
    let mut orders = vec![first_order(problem)?];
    for k in 2..=order {
        let next = recursion_step(problem, &orders, k)?;
        orders.push(next);
    }
    Ok(SeriesSolution::new("n1", problem, orders))
}

/// Fitted dominating envelope `|u^{(k)}_ν| ≤ A C^k e^{−ξ′|ν|₁} |ε|^{(k+1)/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEnvelope {
    pub a: f64,
    pub c: f64,
    pub xi_prime: f64,
    /// Largest observed `|u(ε/2)| / |u(ε)|` divided by `2^{−(k+1)/2}`.
    pub worst_scaling_ratio: f64,
    pub checked_coefficients: usize,
}

impl DecayEnvelope {
    pub fn bound(&self, k: usize, nu: &Mode, epsilon: f64) -> f64 {
        self.a * self.c.powi(k as i32) * (-self.xi_prime * nu.l1() as f64).exp() * epsilon.abs().powf((k as f64 + 1.0) / 2.0)
    }
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut mi = m;
        for row in 0..3 {
            mi[row][i] = r[row];
        }
        *o = det(mi) / d;
    }
    Some(out)
}

/// Fits the envelope to `solution` and checks the `ε`-scaling law by
/// recomputing the same orders at `ε/2`.
pub fn check_envelope(problem: &Problem, solution: &SeriesSolution) -> Result<DecayEnvelope> {
    let kmax = solution.order();
    if kmax < 3 {
        return Err(Error::InvalidInput("envelope check needs at least 3 orders".into()));
    }
    let eps = solution.epsilon;
    if eps == 0.0 {
        return Err(Error::InvalidInput("envelope check needs ε ≠ 0".into()));
    }
    let log_eps = eps.abs().ln();

    // (k, |ν|₁, log|u| − (k+1)/2 log|ε|)
    let mut pts = Vec::new();
    for (idx, s) in solution.orders.iter().enumerate() {
        let k = (idx + 1) as f64;
        for (nu, c) in s.iter() {
            pts.push((k, nu.l1() as f64, c.norm().ln() - 0.5 * (k + 1.0) * log_eps));
        }
    }
    // least squares t ≈ α + βk − ξ|ν|, then lift α until it dominates
    let (mut beta, mut xi) = (0.0, 0.0);
    if pts.len() >= 3 {
        let mut m = [[0.0; 3]; 3];
        let mut r = [0.0; 3];
        for &(k, n, t) in &pts {
            let row = [1.0, k, -n];
            for i in 0..3 {
                r[i] += row[i] * t;
                for j in 0..3 {
                    m[i][j] += row[i] * row[j];
                }
            }
        }
        if let Some(sol) = solve3(m, r) {
            beta = sol[1];
            xi = sol[2];
        }
    }
    let xi_prime = xi.max(1e-6);
    let log_a = pts
        .iter()
        .map(|&(k, n, t)| t - beta * k + xi_prime * n)
        .fold(f64::NEG_INFINITY, f64::max);

    let half = solve(&problem.with_epsilon(eps / 2.0), kmax)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (idx, s) in solution.orders.iter().enumerate() {
        let k = (idx + 1) as f64;
        let bound = (-(k + 1.0) / 2.0).exp2();
        for (nu, c) in s.iter() {
            let ratio = half.orders[idx].get(nu).norm() / c.norm();
            worst = worst.max(ratio / bound);
            checked += 1;
            if ratio > bound * SCALING_SLACK {
                return Err(Error::EnvelopeViolation(format!(
                    "k={} ν={:?}: |u(ε/2)|/|u(ε)| = {ratio:.6e} exceeds {:.6e}",
                    idx + 1,
                    nu,
                    bound * SCALING_SLACK
                )));
            }
        }
    }
    Ok(DecayEnvelope {
        a: if log_a.is_finite() { log_a.exp() } else { 0.0 },
        c: beta.exp(),
        xi_prime,
        worst_scaling_ratio: worst,
        checked_coefficients: checked,
    })
}

/// Registry entry for the simple-zero pipeline.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonDegenerateSolver;

impl ResponseSolver for NonDegenerateSolver {
    fn name(&self) -> &'static str {
        "n1"
    }

    fn description(&self) -> &'static str {
        "simple zero: μ-series with propagator D(ε,s) = −εs² + is + εa"
    }

    fn supports(&self, problem: &Problem) -> bool {
        problem.nonlinearity.order == 1
    }

    fn solve(&self, problem: &Problem, order: usize) -> Result<SeriesSolution> {
        solve(problem, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::REALITY_TOL;
    use crate::model::fixtures::{e1, e2};

    fn m(v: &[i32]) -> Mode {
        Mode(v.to_vec())
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn propagator_values() {
        assert_eq!(propagator_d(0.3, 0.0, 2.0), Complex64::new(0.6, 0.0));
        assert_eq!(propagator_d(0.0, 1.7, 2.0), Complex64::new(0.0, 1.7));
        let d = propagator_d(0.1, 1.0, 1.0);
        assert!(d.re.abs() < 1e-17 && d.im == 1.0);
    }

    #[test]
    fn first_order_closed_form() {
        let eps = 0.1;
        let u1 = first_order(&e1(eps)).unwrap();
        assert!(close(u1.get(&m(&[1])), Complex64::new(0.0, -eps / 2.0), 1e-15));
        assert!(close(u1.get(&m(&[-1])), Complex64::new(0.0, eps / 2.0), 1e-15));
        assert!(!u1.contains(&m(&[0])));
    }

    #[test]
    fn low_orders_closed_form() {
        let eps = 0.1;
        let p = e1(eps);
        let s = solve(&p, 3).unwrap();
        assert!(s.coefficient(2).is_empty());
        let u30 = s.coefficient(3).get(&m(&[0]));
        assert!(close(u30, Complex64::new(-eps * eps / 2.0, 0.0), 1e-13));
        let expected = Complex64::new(eps.powi(3), 0.0) / (Complex64::new(-3.0 * eps, 2.0) * 4.0);
        assert!(close(s.coefficient(3).get(&m(&[2])), expected, 1e-13));
    }

    #[test]
    fn order_one_solution_is_first_order() {
        let p = e2(0.05);
        assert_eq!(solve(&p, 1).unwrap().orders, vec![first_order(&p).unwrap()]);
    }

    #[test]
    fn recursion_rejects_missing_orders() {
        assert!(recursion_step(&e1(0.1), &[], 3).is_err());
    }

    #[test]
    fn reality_parity_and_support() {
        let p = e1(0.07);
        let s = solve(&p, 8).unwrap();
        for (idx, u) in s.orders.iter().enumerate() {
            let k = idx as i32 + 1;
            assert!(u.is_conjugate_symmetric(REALITY_TOL));
            assert!(u.max_l1() <= k as u64);
            // quadratic g with one-mode forcing: even orders vanish
            if k % 2 == 0 {
                assert!(u.is_empty(), "k={k}");
            }
        }
    }

    #[test]
    fn radius_estimate_exceeds_one_for_small_eps() {
        let s = solve(&e1(0.05), 10).unwrap();
        assert!(s.mu_radius_estimate > 1.0, "{}", s.mu_radius_estimate);
        assert!(!s.radius_warning);
    }

    #[test]
    fn lower_bound_on_divisor() {
        for &eps in &[1e-3, 1e-2, 0.05, 0.1] {
            for i in -1000..=1000 {
                let s = i as f64 * 0.01;
                let d = propagator_d(eps, s, 1.0).norm();
                assert!(d >= (eps).max(s.abs()), "eps={eps} s={s}");
            }
        }
    }

    #[test]
    fn envelope_dominates_and_scales() {
        let p = e1(0.05);
        let s = solve(&p, 6).unwrap();
        let env = check_envelope(&p, &s).unwrap();
        for (idx, u) in s.orders.iter().enumerate() {
            for (nu, c) in u.iter() {
                assert!(c.norm() <= env.bound(idx + 1, nu, 0.05) * (1.0 + 1e-12));
            }
        }
        assert!(env.worst_scaling_ratio <= SCALING_SLACK);
    }

    #[test]
    fn envelope_needs_three_orders() {
        let p = e1(0.05);
        assert!(check_envelope(&p, &solve(&p, 2).unwrap()).is_err());
    }

    #[test]
    fn smooth_in_epsilon() {
        // central differences at h and h/2 agree to second order
        let eps = 0.05;
        let k = 5;
        let coeff = |e: f64| solve(&e1(e), k).unwrap().total().get(&m(&[1]));
        let d = |h: f64| (coeff(eps + h) - coeff(eps - h)) / (2.0 * h);
        let (d1, d2, d3) = (d(1e-2), d(5e-3), d(2.5e-3));
        let ratio = (d1 - d2).norm() / (d2 - d3).norm();
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }
}
