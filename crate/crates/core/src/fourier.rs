//! Sparse truncated Fourier series on the d-torus.
//!
//! A [`FourierSeries`] maps integer mode vectors to complex coefficients and
//! represents `Σ_ν c_ν e^{iν·ψ}`. Supports are tiny in this problem (a few
//! hundred modes at most), so products are computed by direct convolution
//! over a `BTreeMap`, which also fixes the iteration order of every report.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::FrequencyVector;

/// Tolerance of the conjugate-pair invariant for series declared real.
pub const REALITY_TOL: f64 = 1e-13;

/// An integer mode vector `ν ∈ Z^d`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mode(pub Vec<i32>);

impl Mode {
    pub fn zero(dim: usize) -> Self {
        Mode(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// The ℓ¹ norm, the lattice norm used throughout the crate.
    pub fn l1(&self) -> u64 {
        self.0.iter().map(|&c| c.unsigned_abs() as u64).sum()
    }

    pub fn neg(&self) -> Mode {
        Mode(self.0.iter().map(|&c| -c).collect())
    }

    pub fn add(&self, other: &Mode) -> Mode {
        Mode(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Mode) -> Mode {
        Mode(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl From<Vec<i32>> for Mode {
    fn from(v: Vec<i32>) -> Self {
        Mode(v)
    }
}

impl fmt::Debug for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// One serialized coefficient: `(ν, re, im)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRecord {
    pub nu: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, PartialEq)]
pub struct FourierSeries {
    dim: usize,
    coeffs: BTreeMap<Mode, Complex64>,
    declared_real: bool,
}

impl fmt::Debug for FourierSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.coeffs.iter())
            .finish()
    }
}

fn is_exact_zero(c: Complex64) -> bool {
    c.re == 0.0 && c.im == 0.0
}

impl FourierSeries {
    /// The empty series (identically zero), declared real.
    pub fn zero(dim: usize) -> Self {
        FourierSeries {
            dim,
            coeffs: BTreeMap::new(),
            declared_real: true,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut s = FourierSeries::zero(dim);
        s.add_at(Mode::zero(dim), Complex64::new(c, 0.0));
        s
    }

    /// Builds a series from `(ν, c_ν)` pairs, summing repeated modes.
    pub fn from_pairs<I>(dim: usize, declared_real: bool, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Mode, Complex64)>,
    {
        let mut s = FourierSeries {
            dim,
            coeffs: BTreeMap::new(),
            declared_real,
        };
        for (mode, c) in pairs {
            if mode.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: mode.dim(),
                });
            }
            s.add_at(mode, c);
        }
        Ok(s)
    }

    pub fn from_records(dim: usize, declared_real: bool, records: &[ModeRecord]) -> Result<Self> {
        Self::from_pairs(
            dim,
            declared_real,
            records
                .iter()
                .map(|r| (Mode(r.nu.clone()), Complex64::new(r.re, r.im))),
        )
    }

    /// `cos(ν·ψ)` scaled by `amp`.
    pub fn cosine(mode: Mode, amp: f64) -> Self {
        let dim = mode.dim();
        let half = Complex64::new(amp / 2.0, 0.0);
        let neg = mode.neg();
        Self::from_pairs(dim, true, [(mode, half), (neg, half)]).expect("same dimension")
    }

    /// `sin(ν·ψ)` scaled by `amp`.
    pub fn sine(mode: Mode, amp: f64) -> Self {
        let dim = mode.dim();
        let neg = mode.neg();
        Self::from_pairs(
            dim,
            true,
            [
                (mode, Complex64::new(0.0, -amp / 2.0)),
                (neg, Complex64::new(0.0, amp / 2.0)),
            ],
        )
        .expect("same dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn declared_real(&self) -> bool {
        self.declared_real
    }

    pub fn set_declared_real(&mut self, real: bool) {
        self.declared_real = real;
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, mode: &Mode) -> Complex64 {
        self.coeffs.get(mode).copied().unwrap_or_default()
    }

    pub fn contains(&self, mode: &Mode) -> bool {
        self.coeffs.contains_key(mode)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mode, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn modes(&self) -> impl Iterator<Item = &Mode> {
        self.coeffs.keys()
    }

    /// Adds `c` to the coefficient at `mode`, keeping the canonical form.
    pub fn add_at(&mut self, mode: Mode, c: Complex64) {
        use std::collections::btree_map::Entry;
        debug_assert_eq!(mode.dim(), self.dim);
        match self.coeffs.entry(mode) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if is_exact_zero(*o.get()) {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if !is_exact_zero(c) {
                    v.insert(c);
                }
            }
        }
    }

    /// Overwrites the coefficient at `mode`; an exact zero removes it.
    pub fn set(&mut self, mode: Mode, c: Complex64) {
        if is_exact_zero(c) {
            self.coeffs.remove(&mode);
        } else {
            self.coeffs.insert(mode, c);
        }
    }

    pub fn remove(&mut self, mode: &Mode) -> Option<Complex64> {
        self.coeffs.remove(mode)
    }

    /// Drops exact zeros. Near-zeros are kept on purpose: thresholding would
    /// break order-by-order identities.
    pub fn prune(&mut self) {
        self.coeffs.retain(|_, c| !is_exact_zero(*c));
    }

    fn check_dim(&self, other: &FourierSeries) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Coefficients of the pointwise product.
    pub fn convolve(&self, other: &FourierSeries) -> Result<FourierSeries> {
        self.check_dim(other)?;
        let mut out = BTreeMap::<Mode, Complex64>::new();
        for (ma, ca) in &self.coeffs {
            for (mb, cb) in &other.coeffs {
                *out.entry(ma.add(mb)).or_default() += ca * cb;
            }
        }
        let mut s = FourierSeries {
            dim: self.dim,
            coeffs: out,
            declared_real: self.declared_real && other.declared_real,
        };
        s.prune();
        Ok(s)
    }

    pub fn add(&self, other: &FourierSeries) -> Result<FourierSeries> {
        self.check_dim(other)?;
        let mut s = self.clone();
        for (m, c) in &other.coeffs {
            *s.coeffs.entry(m.clone()).or_default() += c;
        }
        s.declared_real = self.declared_real && other.declared_real;
        s.prune();
        Ok(s)
    }

    pub fn sub(&self, other: &FourierSeries) -> Result<FourierSeries> {
        self.add(&other.scale_real(-1.0))
    }

    pub fn add_assign(&mut self, other: &FourierSeries) -> Result<()> {
        *self = self.add(other)?;
        Ok(())
    }

    pub fn scale_real(&self, k: f64) -> FourierSeries {
        let mut s = self.clone();
        for c in s.coeffs.values_mut() {
            *c *= k;
        }
        s.prune();
        s
    }

    pub fn scale(&self, k: Complex64) -> FourierSeries {
        let mut s = self.clone();
        for c in s.coeffs.values_mut() {
            *c *= k;
        }
        s.declared_real = self.declared_real && k.im == 0.0;
        s.prune();
        s
    }

    /// The average on the torus, i.e. the zero mode.
    pub fn average(&self) -> Complex64 {
        self.get(&Mode::zero(self.dim))
    }

    pub fn evaluate(&self, psi: &[f64]) -> Result<Complex64> {
        if psi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: psi.len(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .map(|(m, c)| {
                let phase: f64 = m.0.iter().zip(psi).map(|(&n, &p)| n as f64 * p).sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum())
    }

    /// Derivative along the linear flow `ψ = ωt`: mode `ν` is multiplied by
    /// `(iω·ν)^order`.
    pub fn directional_derivative(&self, omega: &FrequencyVector, order: u32) -> Result<FourierSeries> {
        if omega.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: omega.dim(),
            });
        }
        let mut s = FourierSeries::zero(self.dim);
        s.declared_real = self.declared_real;
        for (m, c) in &self.coeffs {
            let factor = Complex64::new(0.0, omega.dot(m)).powu(order);
            s.set(m.clone(), c * factor);
        }
        Ok(s)
    }

    /// `Σ_p coeffs[p] u^p`, evaluated by Horner's rule over convolution.
    pub fn compose_polynomial(coeffs: &[f64], u: &FourierSeries) -> FourierSeries {
        let dim = u.dim;
        let mut acc = FourierSeries::zero(dim);
        for &a in coeffs.iter().rev() {
            acc = acc.convolve(u).expect("same dimension");
            if a != 0.0 {
                acc.add_at(Mode::zero(dim), Complex64::new(a, 0.0));
            }
        }
        acc.declared_real = u.declared_real;
        acc
    }

    /// Integer power by repeated convolution.
    pub fn pow(&self, p: usize) -> FourierSeries {
        let mut acc = FourierSeries::constant(self.dim, 1.0);
        for _ in 0..p {
            acc = acc.convolve(self).expect("same dimension");
        }
        acc.declared_real = self.declared_real;
        acc
    }

    /// Largest `|c(ν) − conj(c(−ν))|` over stored modes.
    pub fn conjugate_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(m, c)| (c - self.get(&m.neg()).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.conjugate_defect() <= tol
    }

    /// Largest `|ν|₁` over the support, 0 for the empty series.
    pub fn max_l1(&self) -> u64 {
        self.coeffs.keys().map(Mode::l1).max().unwrap_or(0)
    }

    /// Largest coefficient magnitude.
    pub fn sup_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ|c_ν|`, an upper bound for the sup of the function on the torus.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    pub fn records(&self) -> Vec<ModeRecord> {
        self.coeffs
            .iter()
            .map(|(m, c)| ModeRecord {
                nu: m.0.clone(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }
}

impl Serialize for FourierSeries {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.records().serialize(serializer)
    }
}
