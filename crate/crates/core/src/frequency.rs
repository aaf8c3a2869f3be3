//! Diophantine diagnostics of the frequency vector.
//!
//! `α_n` is the smallest `|ω·ν|` over the punctured lattice ball
//! `0 < |ν|₁ ≤ 2^n`, `β_n` the same minimum restricted to the support of the
//! forcing, and `ε_n = 2^{-n} log(1/β_n)`. All minima are computed by plain
//! enumeration of the ball, guarded by a point budget.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::Mode;

/// Default cap on the number of lattice points visited by one minimum.
pub const DEFAULT_LATTICE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FrequencyVector(Vec<f64>);

impl FrequencyVector {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidInput("frequency vector must have d >= 1".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("frequency vector has non-finite entries".into()));
        }
        if omega.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput("frequency vector is identically zero".into()));
        }
        Ok(FrequencyVector(omega))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `ω·ν` in plain double arithmetic.
    pub fn dot(&self, nu: &Mode) -> f64 {
        self.0.iter().zip(&nu.0).map(|(w, &n)| w * n as f64).sum()
    }

    /// `ψ = ωt`.
    pub fn phase_at(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|w| w * t).collect()
    }
}

/// Number of lattice points with `|ν|₁ ≤ radius` in dimension `dim`.
pub fn l1_ball_size(dim: usize, radius: u64) -> u128 {
    // Σ_i 2^i C(d,i) C(R,i)
    let mut total: u128 = 0;
    let mut c_d: u128 = 1;
    let mut c_r: u128 = 1;
    for i in 0..=dim.min(radius as usize) {
        if i > 0 {
            c_d = c_d * (dim as u128 - i as u128 + 1) / i as u128;
            c_r = c_r * (radius as u128 - i as u128 + 1) / i as u128;
        }
        total = total.saturating_add((1u128 << i).saturating_mul(c_d).saturating_mul(c_r));
    }
    total
}

/// Calls `visit` on every nonzero `ν` with `|ν|₁ ≤ radius`.
pub fn for_each_in_l1_ball(dim: usize, radius: u64, mut visit: impl FnMut(&Mode)) {
    fn rec(buf: &mut Vec<i32>, pos: usize, left: i64, visit: &mut dyn FnMut(&Mode)) {
        if pos == buf.len() {
            let m = Mode(buf.clone());
            if !m.is_zero() {
                visit(&m);
            }
            return;
        }
        for c in -left..=left {
            buf[pos] = c as i32;
            rec(buf, pos + 1, left - c.abs(), visit);
        }
        buf[pos] = 0;
    }
    let mut buf = vec![0; dim];
    rec(&mut buf, 0, radius as i64, &mut visit);
}

fn check_budget(dim: usize, radius: u64, budget: u64) -> Result<()> {
    let points = l1_ball_size(dim, radius);
    if points > budget as u128 {
        return Err(Error::BudgetExceeded {
            dim,
            radius,
            points,
            budget,
        });
    }
    Ok(())
}

/// Exact minimum of `|ω·ν|` over `0 < |ν|₁ ≤ radius`, with its minimiser.
pub fn lattice_minimum(omega: &FrequencyVector, radius: u64, budget: u64) -> Result<(f64, Mode)> {
    check_budget(omega.dim(), radius, budget)?;
    let mut best: Option<(f64, Mode)> = None;
    let mut resonance: Option<Mode> = None;
    for_each_in_l1_ball(omega.dim(), radius, |nu| {
        if resonance.is_some() {
            return;
        }
        let v = omega.dot(nu).abs();
        if v == 0.0 {
            resonance = Some(nu.clone());
            return;
        }
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, nu.clone()));
        }
    });
    if let Some(nu) = resonance {
        return Err(Error::ExactResonance(nu.0));
    }
    best.ok_or_else(|| Error::InvalidInput("lattice ball of radius 0 is empty".into()))
}

fn ball_radius(n: u32) -> Result<u64> {
    if n >= 63 {
        return Err(Error::InvalidInput(format!("scale n = {n} is too large")));
    }
    Ok(1u64 << n)
}

/// `α_n(ω)`.
pub fn alpha_n(omega: &FrequencyVector, n: u32, budget: u64) -> Result<f64> {
    Ok(lattice_minimum(omega, ball_radius(n)?, budget)?.0)
}

/// `β_n(ω)`: the minimum over support modes in the ball, `None` when no
/// support mode lies in it.
pub fn beta_n<'a>(
    omega: &FrequencyVector,
    support: impl IntoIterator<Item = &'a Mode>,
    n: u32,
) -> Result<Option<f64>> {
    let radius = ball_radius(n)?;
    let mut best: Option<f64> = None;
    for nu in support {
        if nu.is_zero() || nu.l1() > radius {
            continue;
        }
        let v = omega.dot(nu).abs();
        if v == 0.0 {
            return Err(Error::ExactResonance(nu.0.clone()));
        }
        best = Some(best.map_or(v, |b| b.min(v)));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiophantineReport {
    pub n_max: u32,
    pub alpha: Vec<f64>,
    /// `None` marks an empty support intersection.
    pub beta: Vec<Option<f64>>,
    pub epsilon_seq: Vec<Option<f64>>,
    /// `Σ_{n ≤ n_max} 2^{-n} log(1/α_n)`.
    pub bryuno_partial: f64,
    /// Whether the defined `ε_n` are non-increasing over the computed range.
    pub epsilon_decreasing: bool,
}

pub fn diagnose(omega: &FrequencyVector, support: &[Mode], n_max: u32, budget: u64) -> Result<DiophantineReport> {
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut epsilon_seq = Vec::new();
    let mut bryuno_partial = 0.0;
    for n in 0..=n_max {
        let a = alpha_n(omega, n, budget)?;
        let scale = (-(n as f64)).exp2();
        bryuno_partial += scale * (1.0 / a).ln();
        alpha.push(a);
        let b = beta_n(omega, support, n)?;
        epsilon_seq.push(b.map(|b| scale * (1.0 / b).ln()));
        beta.push(b);
    }
    let defined: Vec<f64> = epsilon_seq.iter().flatten().copied().collect();
    let epsilon_decreasing = defined.windows(2).all(|w| w[1] <= w[0]);
    Ok(DiophantineReport {
        n_max,
        alpha,
        beta,
        epsilon_seq,
        bryuno_partial,
        epsilon_decreasing,
    })
}
