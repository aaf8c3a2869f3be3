//! Series solvers for the response solution.
//!
//! Each pipeline implements [`ResponseSolver`] and is registered by name in a
//! [`SolverRegistry`]; callers pick one explicitly or let `"auto"` choose the
//! first registered solver whose hypotheses the problem satisfies.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::frequency::FrequencyVector;
use crate::model::Problem;

pub mod degenerate;
pub mod nondegenerate;

pub use degenerate::DegenerateSolver;
pub use nondegenerate::NonDegenerateSolver;

/// Divisors below this magnitude are treated as resonant.
pub const DIVISOR_FLOOR: f64 = 1e-300;

/// Scalar data of the degenerate pipeline, carried along with the series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateSummary {
    pub zeta: f64,
    pub zeta0: f64,
    pub b: f64,
    pub b0: f64,
    pub alpha_min: Option<f64>,
    pub f2_residual: f64,
    pub iterations: usize,
}

/// Per-order coefficient tables of `u = Σ_k μ^k u^{(k)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub method: &'static str,
    pub omega: FrequencyVector,
    /// `orders[k-1]` holds the coefficient series of `μ^k`.
    pub orders: Vec<FourierSeries>,
    pub epsilon: f64,
    pub c0: f64,
    /// Root-test estimate of the radius of convergence in `μ`.
    pub mu_radius_estimate: f64,
    /// Set when the estimate does not exceed 1 (summation at μ=1 is suspect).
    pub radius_warning: bool,
    pub degenerate: Option<DegenerateSummary>,
}

impl SeriesSolution {
    pub fn new(method: &'static str, problem: &Problem, orders: Vec<FourierSeries>) -> Self {
        let mu_radius_estimate = root_test_radius(&orders);
        SeriesSolution {
            method,
            omega: problem.omega.clone(),
            orders,
            epsilon: problem.epsilon,
            c0: problem.nonlinearity.c0,
            mu_radius_estimate,
            radius_warning: mu_radius_estimate <= 1.0,
            degenerate: None,
        }
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.orders.len()
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// `u^{(k)}`, 1-based.
    pub fn coefficient(&self, k: usize) -> &FourierSeries {
        &self.orders[k - 1]
    }

    /// `u` summed at `μ = 1`.
    pub fn total(&self) -> FourierSeries {
        let mut acc = FourierSeries::zero(self.dim());
        for s in &self.orders {
            acc = acc.add(s).expect("same dimension");
        }
        acc
    }

    /// Same solution truncated to the first `k` orders.
    pub fn truncated(&self, k: usize) -> SeriesSolution {
        let mut s = self.clone();
        s.orders.truncate(k);
        s.mu_radius_estimate = root_test_radius(&s.orders);
        s.radius_warning = s.mu_radius_estimate <= 1.0;
        s
    }

    /// `x(t) = c₀ + u(ωt)` and `ẋ(t)`.
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        let psi = self.omega.phase_at(t);
        let u = self.total();
        let du = u.directional_derivative(&self.omega, 1).expect("same dimension");
        (
            self.c0 + u.evaluate(&psi).expect("same dimension").re,
            du.evaluate(&psi).expect("same dimension").re,
        )
    }
}

/// `1 / limsup ‖u^{(k)}‖^{1/k}` over the upper half of the computed window,
/// using the sup norm of the coefficients.
pub fn root_test_radius(orders: &[FourierSeries]) -> f64 {
    let kmax = orders.len();
    let start = kmax.div_ceil(2).max(1);
    let limsup = (start..=kmax)
        .filter_map(|k| {
            let n = orders[k - 1].sup_norm();
            (n > 0.0).then(|| n.powf(1.0 / k as f64))
        })
        .fold(0.0, f64::max);
    if limsup == 0.0 {
        f64::INFINITY
    } else {
        1.0 / limsup
    }
}

/// Table of ordered-composition products
/// `P[p][m] = Σ_{k₁+…+k_p=m, k_i ≥ 1} y_{k₁} ⊛ … ⊛ y_{k_p}`,
/// i.e. the `μ^m` coefficient of `(Σ_k μ^k y_k)^p`.
pub(crate) struct CompositionTable {
    dim: usize,
    max_power: usize,
    // table[p][m]; p = 0 is unused
    table: Vec<Vec<FourierSeries>>,
}

impl CompositionTable {
    /// Fills columns `m = 1..=max_order` from `y[0..]` (`y[j-1]` is `y_j`).
    pub(crate) fn build(dim: usize, y: &[FourierSeries], max_power: usize, max_order: usize) -> Self {
        let mut t = CompositionTable {
            dim,
            max_power,
            table: vec![vec![FourierSeries::zero(dim); max_order + 1]; max_power + 1],
        };
        for m in 1..=max_order {
            t.fill_column(y, m);
        }
        t
    }

    fn fill_column(&mut self, y: &[FourierSeries], m: usize) {
        if self.max_power == 0 {
            return;
        }
        self.table[1][m] = y.get(m - 1).cloned().unwrap_or_else(|| FourierSeries::zero(self.dim));
        for p in 2..=self.max_power.min(m) {
            let mut acc = FourierSeries::zero(self.dim);
            for j in 1..=(m + 1 - p) {
                let Some(yj) = y.get(j - 1) else { break };
                let rest = &self.table[p - 1][m - j];
                if yj.is_empty() || rest.is_empty() {
                    continue;
                }
                acc.add_assign(&yj.convolve(rest).expect("same dimension"))
                    .expect("same dimension");
            }
            self.table[p][m] = acc;
        }
    }

    pub(crate) fn get(&self, p: usize, m: usize) -> &FourierSeries {
        &self.table[p][m]
    }
}

pub(crate) fn checked_inverse(d: Complex64, mode: &crate::fourier::Mode) -> Result<Complex64> {
    if !(d.norm() >= DIVISOR_FLOOR) {
        return Err(Error::ResonantDivisor {
            mode: mode.0.clone(),
            magnitude: d.norm(),
        });
    }
    Ok(d.inv())
}

/// A named series-construction pipeline.
pub trait ResponseSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Whether the problem satisfies this pipeline's hypotheses.
    fn supports(&self, problem: &Problem) -> bool;

    fn solve(&self, problem: &Problem, order: usize) -> Result<SeriesSolution>;
}

pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn ResponseSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = SolverRegistry::empty();
        r.register(Box::new(NonDegenerateSolver));
        r.register(Box::new(DegenerateSolver));
        r
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            solvers: BTreeMap::new(),
        }
    }

    /// Registers a solver, replacing any previous one with the same name.
    pub fn register(&mut self, solver: Box<dyn ResponseSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.solvers.keys().copied()
    }

    pub fn get(&self, name: &str) -> Option<&dyn ResponseSolver> {
        self.solvers.get(name).map(|b| b.as_ref())
    }

    /// Resolves `method` (a registered name or `"auto"`) for `problem`.
    pub fn select(&self, problem: &Problem, method: &str) -> Result<&dyn ResponseSolver> {
        if method == "auto" {
            return self
                .solvers
                .values()
                .find(|s| s.supports(problem))
                .map(|b| b.as_ref())
                .ok_or_else(|| Error::UnknownSolver(format!("auto: none supports order {}", problem.nonlinearity.order)));
        }
        let solver = self.get(method).ok_or_else(|| Error::UnknownSolver(method.to_string()))?;
        if !solver.supports(problem) {
            return Err(Error::InvalidInput(format!(
                "solver '{}' does not apply to a zero of order {}",
                method, problem.nonlinearity.order
            )));
        }
        Ok(solver)
    }

    pub fn solve(&self, problem: &Problem, method: &str, order: usize) -> Result<SeriesSolution> {
        self.select(problem, method)?.solve(problem, order)
    }
}
