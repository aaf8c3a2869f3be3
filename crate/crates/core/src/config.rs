//! TOML run configuration.
//!
//! ```toml
//! omega = [1.0]
//! epsilon = 0.05
//!
//! [[forcing]]
//! nu = [1]
//! re = 0.5
//!
//! [[forcing]]
//! nu = [-1]
//! re = 0.5
//!
//! [g]
//! c0 = 0.0
//! coeffs = [0.0, 1.0, 1.0]
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, ModeRecord};
use crate::frequency::{FrequencyVector, DEFAULT_LATTICE_BUDGET};
use crate::model::Problem;
use crate::trees::DEFAULT_TREE_BUDGET;
use crate::verify::DEFAULT_T_END;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega: Vec<f64>,
    pub epsilon: f64,
    #[serde(default)]
    pub forcing: Vec<ModeRecord>,
    pub g: GConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub attract: AttractConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

/// `g(x) = Σ coeffs[p] x^p` and the offset `c₀` with `g(c₀) = f₀`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GConfig {
    #[serde(default)]
    pub c0: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// A registered solver name or `"auto"`.
    pub method: String,
    /// Truncation order `K`.
    pub order: usize,
    /// Highest order compared against the tree oracle.
    pub k_max: usize,
    pub tree_budget: usize,
    /// Highest `n` of the Diophantine diagnostics.
    pub n_max: u32,
    pub lattice_budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: "auto".into(),
            order: 8,
            k_max: 5,
            tree_budget: DEFAULT_TREE_BUDGET,
            n_max: 4,
            lattice_budget: DEFAULT_LATTICE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttractConfig {
    pub offsets: Vec<f64>,
    pub t_end: f64,
    /// Defaults to `min(2π/(20 max|ω·ν|), ε/5)`.
    pub dt: Option<f64>,
}

impl Default for AttractConfig {
    fn default() -> Self {
        AttractConfig {
            offsets: vec![0.01, 0.05, 0.1],
            t_end: DEFAULT_T_END,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    pub orders: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_list: vec![0.01, 0.02, 0.05, 0.1],
            orders: vec![4, 8],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Builds and validates the problem.
    pub fn problem(&self) -> Result<Problem> {
        let omega = FrequencyVector::new(self.omega.clone())?;
        let forcing = FourierSeries::from_records(omega.dim(), true, &self.forcing)?;
        Problem::new(omega, forcing, self.g.coeffs.clone(), self.g.c0, self.epsilon)
    }
}
