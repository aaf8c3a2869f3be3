//! Problem definition `ε ẍ + ẋ + ε g(x) = ε f(ωt)` and its validation.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Mode, REALITY_TOL};
use crate::frequency::FrequencyVector;

/// Threshold below which a Taylor coefficient counts as vanishing.
pub const TAYLOR_ZERO_TOL: f64 = 1e-12;
/// Tolerance of `g(c₀) = f₀`.
pub const AVERAGE_TOL: f64 = 1e-10;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Re-centres `Σ q_j x^j` at `c0`: returns `a_p` with `g(c0 + y) = Σ a_p y^p`.
pub fn recenter(poly: &[f64], c0: f64) -> Vec<f64> {
    (0..poly.len())
        .map(|p| {
            (p..poly.len())
                .map(|q| poly[q] * binomial(q, p) * c0.powi((q - p) as i32))
                .sum()
        })
        .collect()
}

/// Horner evaluation of `Σ poly[j] x^j`.
pub fn eval_poly(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_poly_derivative(poly: &[f64], x: f64) -> f64 {
    poly.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, &c)| acc * x + j as f64 * c)
}

/// Taylor data of `g` at the equilibrium offset `c₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nonlinearity {
    pub c0: f64,
    /// `a_p = g^{(p)}(c₀)/p!`.
    pub taylor: Vec<f64>,
    /// Order of the zero of `g − f₀` at `c₀`.
    pub order: usize,
    /// `a = a_order`.
    pub a: f64,
    /// `g` as supplied, in powers of `x`.
    pub poly: Vec<f64>,
}

impl Nonlinearity {
    pub fn from_polynomial(poly: Vec<f64>, c0: f64) -> Result<Self> {
        if poly.iter().any(|c| !c.is_finite()) || !c0.is_finite() {
            return Err(Error::InvalidInput("non-finite polynomial data".into()));
        }
        let taylor = recenter(&poly, c0);
        let order = taylor
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, a)| a.abs() > TAYLOR_ZERO_TOL)
            .map(|(p, _)| p)
            .ok_or(Error::ZeroLeadingCoefficient)?;
        if order % 2 == 0 {
            return Err(Error::EvenOrderZero(order));
        }
        let a = taylor[order];
        Ok(Nonlinearity {
            c0,
            taylor,
            order,
            a,
            poly,
        })
    }

    pub fn a_p(&self, p: usize) -> f64 {
        self.taylor.get(p).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.taylor.len().saturating_sub(1)
    }

    /// Coefficients of `G(x) = g(x) − g(c₀) − a x` (order 1) or
    /// `G̃(x) = Σ_{p ≥ order} a_p x^p` (order ≥ 3), indexed by power.
    pub fn shifted_tail(&self) -> Vec<f64> {
        let start = if self.order == 1 { 2 } else { self.order };
        let mut tail: Vec<f64> = self
            .taylor
            .iter()
            .enumerate()
            .map(|(p, &a)| if p >= start { a } else { 0.0 })
            .collect();
        while tail.last() == Some(&0.0) {
            tail.pop();
        }
        tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub order: usize,
    pub a: f64,
    /// Trigonometric degree `N = max |ν|₁` of the forcing.
    pub forcing_degree: u64,
    pub f0: f64,
    pub g_c0: f64,
    /// Name of the solver pipeline that applies.
    pub solver: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub omega: FrequencyVector,
    pub forcing: FourierSeries,
    pub nonlinearity: Nonlinearity,
    pub epsilon: f64,
}

impl Problem {
    pub fn new(omega: FrequencyVector, forcing: FourierSeries, poly: Vec<f64>, c0: f64, epsilon: f64) -> Result<Self> {
        let nonlinearity = Nonlinearity::from_polynomial(poly, c0)?;
        let problem = Problem {
            omega,
            forcing,
            nonlinearity,
            epsilon,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Re-checks every invariant; side-effect free.
    pub fn validate(&self) -> Result<ValidationReport> {
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidInput("epsilon must be finite".into()));
        }
        if self.forcing.dim() != self.omega.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.omega.dim(),
                found: self.forcing.dim(),
            });
        }
        if !self.forcing.is_conjugate_symmetric(REALITY_TOL) {
            return Err(Error::InvalidInput(
                "forcing must be real: coefficients at ν and −ν must be conjugate".into(),
            ));
        }
        for m in self.forcing.modes() {
            if !m.is_zero() && self.omega.dot(m) == 0.0 {
                return Err(Error::ExactResonance(m.0.clone()));
            }
        }
        let nl = &self.nonlinearity;
        let order = nl.order;
        if order.is_multiple_of(2) {
            return Err(Error::EvenOrderZero(order));
        }
        if nl.a.abs() <= TAYLOR_ZERO_TOL {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let f0 = self.forcing.average().re;
        let g_c0 = nl.a_p(0);
        if (g_c0 - f0).abs() > AVERAGE_TOL {
            return Err(Error::AverageMismatch { g_c0, f0 });
        }
        Ok(ValidationReport {
            order,
            a: nl.a,
            forcing_degree: self.forcing.max_l1(),
            f0,
            g_c0,
            solver: if order == 1 { "n1" } else { "n3" },
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Problem {
        Problem {
            epsilon,
            ..self.clone()
        }
    }

    /// Forcing without its average, `f̃ = f − f₀`.
    pub fn forcing_tilde(&self) -> FourierSeries {
        let mut f = self.forcing.clone();
        f.remove(&Mode::zero(self.dim()));
        f
    }

    /// Modes with `f_ν ≠ 0`.
    pub fn support(&self) -> Vec<Mode> {
        self.forcing.modes().cloned().collect()
    }

    pub fn forcing_coefficient(&self, nu: &Mode) -> Complex64 {
        self.forcing.get(nu)
    }
}

/// Reference problems used by tests, examples and the acceptance suite.
pub mod fixtures {
    use super::*;

    pub const GOLDEN: f64 = 1.618_033_988_749_895;

    /// d=1, ω=1, f = cos ψ, g = x + x², c₀ = 0.
    pub fn e1(epsilon: f64) -> Problem {
        let omega = FrequencyVector::new(vec![1.0]).unwrap();
        let f = FourierSeries::cosine(Mode(vec![1]), 1.0);
        Problem::new(omega, f, vec![0.0, 1.0, 1.0], 0.0, epsilon).unwrap()
    }

    /// d=2, ω=(1, φ), f = cos ψ₁ + cos ψ₂, g = x + x³, c₀ = 0.
    pub fn e2(epsilon: f64) -> Problem {
        let omega = FrequencyVector::new(vec![1.0, GOLDEN]).unwrap();
        let f = FourierSeries::cosine(Mode(vec![1, 0]), 1.0)
            .add(&FourierSeries::cosine(Mode(vec![0, 1]), 1.0))
            .unwrap();
        Problem::new(omega, f, vec![0.0, 1.0, 0.0, 1.0], 0.0, epsilon).unwrap()
    }

    /// d=1, ω=1, f = cos ψ, g = x³, c₀ = 0 (cubic degeneracy).
    pub fn e3(epsilon: f64) -> Problem {
        let omega = FrequencyVector::new(vec![1.0]).unwrap();
        let f = FourierSeries::cosine(Mode(vec![1]), 1.0);
        Problem::new(omega, f, vec![0.0, 0.0, 0.0, 1.0], 0.0, epsilon).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fixtures_validate() {
        let r = e1(0.1).validate().unwrap();
        assert_eq!((r.order, r.a, r.forcing_degree, r.solver), (1, 1.0, 1, "n1"));
        let r = e3(0.1).validate().unwrap();
        assert_eq!((r.order, r.a, r.solver), (3, 1.0, "n3"));
        let r = e2(0.1).validate().unwrap();
        assert_eq!((r.order, r.forcing_degree), (1, 1));
    }

    #[test]
    fn even_order_rejected() {
        let omega = FrequencyVector::new(vec![1.0]).unwrap();
        let f = FourierSeries::cosine(Mode(vec![1]), 1.0);
        let err = Problem::new(omega, f, vec![0.0, 0.0, 1.0], 0.0, 0.1).unwrap_err();
        assert_eq!(err, Error::EvenOrderZero(2));
    }

    #[test]
    fn zero_leading_and_average_mismatch() {
        let omega = FrequencyVector::new(vec![1.0]).unwrap();
        let f = FourierSeries::cosine(Mode(vec![1]), 1.0);
        assert_eq!(
            Problem::new(omega.clone(), f.clone(), vec![0.0], 0.0, 0.1).unwrap_err(),
            Error::ZeroLeadingCoefficient
        );
        assert!(matches!(
            Problem::new(omega, f, vec![0.5, 1.0], 0.0, 0.1).unwrap_err(),
            Error::AverageMismatch { .. }
        ));
    }

    #[test]
    fn non_real_forcing_rejected() {
        let omega = FrequencyVector::new(vec![1.0]).unwrap();
        let f = FourierSeries::from_pairs(1, true, [(Mode(vec![1]), Complex64::new(1.0, 0.0))]).unwrap();
        assert!(Problem::new(omega, f, vec![0.0, 1.0], 0.0, 0.1).is_err());
    }

    #[test]
    fn recentred_offset() {
        // g(x) = (x-2)^3 + 1 with f0 = 1: c0 = 2 is a cubic zero
        let poly = vec![-7.0, 12.0, -6.0, 1.0];
        let omega = FrequencyVector::new(vec![1.0]).unwrap();
        let f = FourierSeries::cosine(Mode(vec![1]), 1.0)
            .add(&FourierSeries::constant(1, 1.0))
            .unwrap();
        let p = Problem::new(omega, f, poly, 2.0, 0.1).unwrap();
        assert_eq!(p.nonlinearity.order, 3);
        assert!((p.nonlinearity.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tails() {
        assert_eq!(e1(0.1).nonlinearity.shifted_tail(), vec![0.0, 0.0, 1.0]);
        assert_eq!(e3(0.1).nonlinearity.shifted_tail(), vec![0.0, 0.0, 0.0, 1.0]);
        let nl = Nonlinearity::from_polynomial(vec![0.0, 1.0], 0.0).unwrap();
        assert!(nl.shifted_tail().is_empty());
    }

    #[test]
    fn validate_is_idempotent() {
        let p = e2(0.05);
        assert_eq!(p.validate().unwrap(), p.validate().unwrap());
    }

    #[test]
    fn recentering_matches_direct_evaluation() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let poly: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c0 = rng.gen_range(-1.5..1.5);
            let taylor = recenter(&poly, c0);
            for _ in 0..20 {
                let x = rng.gen_range(-2.0..2.0);
                let direct = eval_poly(&poly, x);
                let shifted = eval_poly(&taylor, x - c0);
                let abs_poly: Vec<f64> = poly.iter().map(|c| c.abs()).collect();
                let abs_taylor: Vec<f64> = taylor.iter().map(|c| c.abs()).collect();
                let scale = eval_poly(&abs_poly, x.abs()).max(eval_poly(&abs_taylor, (x - c0).abs()));
                assert!((direct - shifted).abs() <= 1e-12 * scale);
            }
        }
    }
}
