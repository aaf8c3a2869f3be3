//! Odd-order degenerate pipeline (`𝔫 ≥ 3`).
//!
//! The solution is split as `x = c₀ + ε x₁ + ξ` with `x₁ = ζ + u^{[1]}` the
//! first-order response and `ξ` zero-average. The linear operator acting on
//! `ξ` is corrected by the counterterm `b ε^𝔫`, which removes the averaged
//! part of the linear-in-`ξ` terms, and the free average `ζ` is fixed by
//! requiring the averaged equation to vanish. Computationally this is a
//! scalar root-find in `ζ` wrapping full rebuilds of the `ξ` orders.

use num_complex::Complex64;
use serde::Serialize;

use super::{checked_inverse, CompositionTable, DegenerateSummary, ResponseSolver, SeriesSolution};
use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Mode};
use crate::frequency::{lattice_minimum, DEFAULT_LATTICE_BUDGET};
use crate::model::Problem;

/// Relative tolerance of the outer `ζ` iteration.
pub const ZETA_TOL: f64 = 1e-11;
const MAX_OUTER_ITERATIONS: usize = 60;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `u^{[1]}_ν = f_ν / (iω·ν (1 + iεω·ν))` for `ν ≠ 0`.
pub fn x1_coefficients(problem: &Problem) -> Result<FourierSeries> {
    let eps = problem.epsilon;
    let mut u = FourierSeries::zero(problem.dim());
    for (nu, f) in problem.forcing.iter() {
        if nu.is_zero() {
            continue;
        }
        let s = problem.omega.dot(nu);
        let inv = checked_inverse(Complex64::new(-eps * s * s, s), nu)?;
        u.set(nu.clone(), f * inv);
    }
    Ok(u)
}

/// `α = min{|ω·ν| : 0 < |ν|₁ ≤ (𝔫+1)N}`; infinite for constant forcing.
pub fn alpha_min(problem: &Problem, budget: u64) -> Result<f64> {
    let radius = (problem.nonlinearity.order as u64 + 1) * problem.forcing.max_l1();
    if radius == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(lattice_minimum(&problem.omega, radius, budget)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Counterterm {
    /// `b = Σ_{p≥𝔫} p a_p ε^{p−𝔫} [x₁^{p−1}]₀`.
    pub b: f64,
    /// Leading part `b₀ = 𝔫 a [x₁^{𝔫−1}]₀`.
    pub b0: f64,
}

fn x1_series(u1: &FourierSeries, zeta: f64) -> FourierSeries {
    let mut x1 = u1.clone();
    x1.add_at(Mode::zero(u1.dim()), Complex64::new(zeta, 0.0));
    x1
}

pub fn counterterm_b(problem: &Problem, u1: &FourierSeries, zeta: f64) -> Counterterm {
    let nl = &problem.nonlinearity;
    let n = nl.order;
    let eps = problem.epsilon;
    let x1 = x1_series(u1, zeta);
    let mut power = FourierSeries::constant(u1.dim(), 1.0); // x₁^{p−1}
    for _ in 1..n {
        power = power.convolve(&x1).expect("same dimension");
    }
    let b0 = n as f64 * nl.a * power.average().re;
    let mut b = 0.0;
    for p in n..=nl.degree() {
        let ap = nl.a_p(p);
        if ap != 0.0 {
            b += p as f64 * ap * eps.powi((p - n) as i32) * power.average().re;
        }
        power = power.convolve(&x1).expect("same dimension");
    }
    Counterterm { b, b0 }
}

/// `(𝒢_E, 𝒢_V)` with `𝒢_E = 1/(is(1+iεs))`, `𝒢_V = 1/(is(1+iεs) + bε^𝔫)`.
pub fn propagators(epsilon: f64, s: f64, b: f64, order: usize) -> Result<(Complex64, Complex64)> {
    let base = Complex64::new(-epsilon * s * s, s);
    let tag = Mode(vec![]);
    let ge = checked_inverse(base, &tag)?;
    let gv = checked_inverse(base + b * epsilon.powi(order as i32), &tag)?;
    Ok((ge, gv))
}

/// `D_V(ε, s) = is(1+iεs) + bε^𝔫`.
pub fn divisor_v(epsilon: f64, s: f64, b: f64, order: usize) -> Complex64 {
    Complex64::new(-epsilon * s * s + b * epsilon.powi(order as i32), s)
}

/// Inputs the `ξ` recursion depends on besides the problem itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub u1: FourierSeries,
    pub zeta: f64,
    pub b: f64,
}

impl Background {
    pub fn new(problem: &Problem, u1: FourierSeries, zeta: f64) -> Self {
        let b = counterterm_b(problem, &u1, zeta).b;
        Background { u1, zeta, b }
    }

    /// `w = ε x₁ = ε(ζ + u^{[1]})`.
    pub fn w(&self, epsilon: f64) -> FourierSeries {
        x1_series(&self.u1, self.zeta).scale_real(epsilon)
    }
}

/// `ξ^{[k]}` from `lower = [ξ^{[2]}, …, ξ^{[k−1]}]`.
pub fn recursion_step_n3(problem: &Problem, bg: &Background, lower: &[FourierSeries], k: usize) -> Result<FourierSeries> {
    if k < 2 || lower.len() < k - 2 {
        return Err(Error::InvalidInput(format!("ξ step k={k} needs orders 2..{}", k.saturating_sub(1))));
    }
    let nl = &problem.nonlinearity;
    let n = nl.order;
    let eps = problem.epsilon;
    let dim = problem.dim();
    let m = k - 1;
    if nl.degree() < n || m < n {
        return Ok(FourierSeries::zero(dim));
    }
    // y₁ = w, y_j = ξ^{[j]}
    let w = bg.w(eps);
    let mut y = Vec::with_capacity(m);
    y.push(w.clone());
    y.extend(lower[..m - 1].iter().cloned());
    let max_power = nl.degree().min(m);
    let table = CompositionTable::build(dim, &y, max_power, m);

    let mut g_hat = FourierSeries::zero(dim);
    let mut w_pow = w.pow(n - 1); // w^{p−1}
    for p in n..=max_power {
        let ap = nl.a_p(p);
        if ap != 0.0 {
            g_hat.add_assign(&table.get(p, m).scale_real(ap))?;
            // the single-ξ terms keep only the fluctuating part of w^{p−1}
            let j = k - p;
            if j >= 2 {
                let avg = w_pow.average().re;
                g_hat.add_assign(&lower[j - 2].scale_real(-(p as f64) * ap * avg))?;
            }
        }
        w_pow = w_pow.convolve(&w)?;
    }

    let mut out = FourierSeries::zero(dim);
    for (nu, g) in g_hat.iter() {
        if nu.is_zero() {
            continue;
        }
        let inv = checked_inverse(divisor_v(eps, problem.omega.dot(nu), bg.b, n), nu)?;
        out.set(nu.clone(), -g * eps * inv);
    }
    out.set_declared_real(true);
    Ok(out)
}

/// `[ξ^{[2]}, …, ξ^{[order]}]`.
pub fn build_xi(problem: &Problem, bg: &Background, order: usize) -> Result<Vec<FourierSeries>> {
    let mut xi: Vec<FourierSeries> = Vec::new();
    for k in 2..=order {
        let next = recursion_step_n3(problem, bg, &xi, k)?;
        xi.push(next);
    }
    Ok(xi)
}

/// Coefficients (by power of `ζ`) of `F̄₂(ζ) = [(ζ + u^{[1]})^𝔫]₀`.
pub fn bifurcation_polynomial(problem: &Problem, u1: &FourierSeries) -> Vec<f64> {
    let n = problem.nonlinearity.order;
    let mut coeffs = vec![0.0; n + 1];
    let mut power = FourierSeries::constant(u1.dim(), 1.0);
    for j in 0..=n {
        // ζ^{n−j} [u^j]₀
        coeffs[n - j] = binomial(n, j) * power.average().re;
        power = power.convolve(u1).expect("same dimension");
    }
    coeffs
}

fn eval(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn eval_derivative(poly: &[f64], x: f64) -> f64 {
    poly.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, &c)| acc * x + j as f64 * c)
}

/// The real root of `F̄₂` by bisection on the Cauchy interval, polished by
/// Newton steps.
pub fn bifurcation_root(poly: &[f64]) -> Result<f64> {
    let lead = *poly.last().expect("nonempty");
    let radius = 1.0 + poly[..poly.len() - 1].iter().map(|c| (c / lead).abs()).sum::<f64>();
    let (mut lo, mut hi) = (-radius, radius);
    let (flo, fhi) = (eval(poly, lo), eval(poly, hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoRealRoot { lo, hi });
    }
    let rising = fhi > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = eval(poly, mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = eval_derivative(poly, x);
        if d == 0.0 {
            break;
        }
        let step = eval(poly, x) / d;
        if !step.is_finite() || step.abs() > (hi - lo).abs().max(1e-300) * 4.0 {
            break;
        }
        x -= step;
    }
    Ok(x)
}

/// Solved degenerate state: `ζ(ε)`, the counterterm and the `ξ` orders.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateState {
    pub zeta: f64,
    /// Root of the averaged polynomial `F̄₂`.
    pub zeta0: f64,
    pub u1: FourierSeries,
    pub b: f64,
    pub b0: f64,
    pub alpha_min: Option<f64>,
    /// `xi_orders[k-2]` is `ξ^{[k]}`.
    pub xi_orders: Vec<FourierSeries>,
    /// `F₂(ζ, ε)` at the returned `ζ`.
    pub f2_residual: f64,
    /// `dF̄₂/dζ` at `ζ₀` from the polynomial.
    pub fbar_slope: f64,
    /// `b₀/a` evaluated at `ζ₀` through the series.
    pub b0_over_a: f64,
    pub iterations: usize,
    pub tolerance: f64,
}

impl DegenerateState {
    pub fn background(&self) -> Background {
        Background {
            u1: self.u1.clone(),
            zeta: self.zeta,
            b: self.b,
        }
    }

    pub fn xi(&self, k: usize) -> &FourierSeries {
        &self.xi_orders[k - 2]
    }
}

/// `F₂(ζ, ε) = [G̃(ε x₁ + ξ)]₀ / (a ε^𝔫)` with `ξ` summed at `μ = 1`,
/// normalised so that it tends to `F̄₂(ζ)` as `ε → 0`.
pub fn f2_value(problem: &Problem, bg: &Background, xi: &[FourierSeries]) -> Result<f64> {
    let nl = &problem.nonlinearity;
    let eps = problem.epsilon;
    if eps == 0.0 {
        let poly = bifurcation_polynomial(problem, &bg.u1);
        return Ok(eval(&poly, bg.zeta));
    }
    let mut total = bg.w(eps);
    for s in xi {
        total.add_assign(s)?;
    }
    let g = FourierSeries::compose_polynomial(&nl.shifted_tail(), &total);
    Ok(g.average().re / (nl.a * eps.powi(nl.order as i32)))
}

struct Evaluation {
    zeta: f64,
    f2: f64,
    xi: Vec<FourierSeries>,
}

fn evaluate_at(problem: &Problem, u1: &FourierSeries, zeta: f64, order: usize) -> Result<Evaluation> {
    let bg = Background::new(problem, u1.clone(), zeta);
    let xi = build_xi(problem, &bg, order)?;
    let f2 = f2_value(problem, &bg, &xi)?;
    Ok(Evaluation { zeta, f2, xi })
}

/// Fixes `ζ` so that the averaged equation vanishes at truncation `order`.
pub fn solve_zeta(problem: &Problem, order: usize) -> Result<DegenerateState> {
    let nl = &problem.nonlinearity;
    if nl.order < 3 {
        return Err(Error::InvalidInput("the degenerate pipeline needs a zero of odd order ≥ 3".into()));
    }
    if order == 0 {
        return Err(Error::InvalidInput("truncation order must be at least 1".into()));
    }
    let u1 = x1_coefficients(problem)?;
    let poly = bifurcation_polynomial(problem, &u1);
    let zeta0 = bifurcation_root(&poly)?;
    let fbar_slope = eval_derivative(&poly, zeta0);
    let b0_over_a = counterterm_b(problem, &u1, zeta0).b0 / nl.a;
    let tolerance = ZETA_TOL * poly.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let zeta_bar = 2.0 * zeta0.abs() + 1.0;
    let alpha = alpha_min(problem, DEFAULT_LATTICE_BUDGET).ok();

    let finish = |e: Evaluation, iterations: usize| {
        let ct = counterterm_b(problem, &u1, e.zeta);
        DegenerateState {
            zeta: e.zeta,
            zeta0,
            u1: u1.clone(),
            b: ct.b,
            b0: ct.b0,
            alpha_min: alpha,
            xi_orders: e.xi,
            f2_residual: e.f2,
            fbar_slope,
            b0_over_a,
            iterations,
            tolerance,
        }
    };

    let mut prev = evaluate_at(problem, &u1, zeta0, order)?;
    if prev.f2.abs() <= tolerance || problem.epsilon == 0.0 {
        return Ok(finish(prev, 0));
    }
    // first step uses the slope of the averaged polynomial
    let slope = if fbar_slope != 0.0 { fbar_slope } else { 1.0 };
    let mut cur = evaluate_at(problem, &u1, zeta0 - prev.f2 / slope, order)?;
    for it in 1..=MAX_OUTER_ITERATIONS {
        if !cur.f2.is_finite() || cur.zeta.abs() > zeta_bar {
            return Err(Error::OuterIterationDivergence(format!(
                "ζ = {} left |ζ| ≤ {zeta_bar} (F₂ = {})",
                cur.zeta, cur.f2
            )));
        }
        if cur.f2.abs() <= tolerance {
            return Ok(finish(cur, it));
        }
        let denom = cur.f2 - prev.f2;
        if denom == 0.0 {
            break;
        }
        let next_zeta = cur.zeta - cur.f2 * (cur.zeta - prev.zeta) / denom;
        let next = evaluate_at(problem, &u1, next_zeta, order)?;
        prev = std::mem::replace(&mut cur, next);
    }
    Err(Error::OuterIterationDivergence(format!(
        "no convergence after {MAX_OUTER_ITERATIONS} iterations (|F₂| = {:e}, tol {tolerance:e})",
        cur.f2.abs()
    )))
}

/// `u = ε(ζ + u^{[1]}) + Σ_{k=2}^{K} ξ^{[k]}`, stored with the first-order
/// part as the `μ¹` coefficient.
pub fn assemble(problem: &Problem, state: &DegenerateState, order: usize) -> SeriesSolution {
    let mut orders = vec![state.background().w(problem.epsilon)];
    orders.extend(state.xi_orders.iter().take(order.saturating_sub(1)).cloned());
    let mut sol = SeriesSolution::new("n3", problem, orders);
    sol.degenerate = Some(DegenerateSummary {
        zeta: state.zeta,
        zeta0: state.zeta0,
        b: state.b,
        b0: state.b0,
        alpha_min: state.alpha_min,
        f2_residual: state.f2_residual,
        iterations: state.iterations,
    });
    sol
}

/// Slack on the per-order `ε → ε/2` ratio bound.
pub const SCALING_SLACK: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub k: usize,
    /// `‖ξ^{[k]}(ε/2)‖ / ‖ξ^{[k]}(ε)‖` in the sup norm.
    pub ratio: f64,
    /// `2^{−(1 + k(𝔫−1)/𝔫²)}` times the slack.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub epsilon: f64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.ratio <= r.bound)
    }
}

/// Re-solves at `ε/2` (with its own `ζ`) and compares the nonzero orders
/// `ξ^{[k]}`, `k ≤ order`.
pub fn check_scaling(problem: &Problem, order: usize) -> Result<ScalingReport> {
    let n = problem.nonlinearity.order as f64;
    let full = solve_zeta(problem, order)?;
    let half = solve_zeta(&problem.with_epsilon(problem.epsilon / 2.0), order)?;
    let mut rows = Vec::new();
    for k in 2..=order {
        let (a, b) = (full.xi(k).sup_norm(), half.xi(k).sup_norm());
        if a == 0.0 && b == 0.0 {
            continue;
        }
        let exponent = 1.0 + k as f64 * (n - 1.0) / (n * n);
        rows.push(ScalingRow {
            k,
            ratio: b / a,
            bound: 2f64.powf(-exponent) * SCALING_SLACK,
        });
    }
    Ok(ScalingReport {
        epsilon: problem.epsilon,
        rows,
    })
}

/// Registry entry for the degenerate pipeline.
#[derive(Debug, Clone, Copy, Default)]
pub struct DegenerateSolver;

impl ResponseSolver for DegenerateSolver {
    fn name(&self) -> &'static str {
        "n3"
    }

    fn description(&self) -> &'static str {
        "odd zero of order ≥ 3: counterterm bε^𝔫 plus implicit solve for the average ζ"
    }

    fn supports(&self, problem: &Problem) -> bool {
        let n = problem.nonlinearity.order;
        n >= 3 && n % 2 == 1
    }

    fn solve(&self, problem: &Problem, order: usize) -> Result<SeriesSolution> {
        let state = solve_zeta(problem, order)?;
        Ok(assemble(problem, &state, order))
    }
}
