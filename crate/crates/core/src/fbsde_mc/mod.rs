//! Monte Carlo for the frozen-coefficient FBSDEs: Euler simulation, least-squares
//! backward induction, HJB values over finite control sets and the tangent system.

mod bsde;
mod hjb;
mod regression;
mod residual;
mod simulate;
mod tangent;

pub use bsde::{bsde_driver, McDriver, solve_bsde_projected, solve_bsde_regression, terminal_values, BsdeEstimate};
pub use hjb::{hjb_value_mc, HjbEstimate, HjbMethod};
pub use regression::{monomial_exponents, Projector};
pub use residual::{martingale_residual, ResidualReport};
pub use simulate::{simulate_frozen_sde, simulate_with_increments, Control, SamplePathBatch};
pub use tangent::{bump_derivative, tangent_fbsde, BumpEstimate, TangentEstimate};

use crate::error::{Error, Result};
use crate::timegrid_paths::{AtomicMeasure, PathMode};

#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    /// Euler steps per grid slab.
    pub substeps: usize,
    pub seed: u64,
    /// Total degree of the polynomial regression basis.
    pub degree: usize,
    /// Adds the summary `∫ Π x dλ` to the regression coordinates.
    pub basis_measure: Option<AtomicMeasure>,
    pub antithetic: bool,
    /// Independent random streams; results depend on `(seed, blocks)` only.
    pub blocks: usize,
    /// Largest number of slab-constant control assignments tried exhaustively.
    pub control_budget: usize,
    pub mode: PathMode,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 20_000,
            substeps: 8,
            seed: 1,
            degree: 2,
            basis_measure: None,
            antithetic: true,
            blocks: 16,
            control_budget: 256,
            mode: PathMode::CadlagPC,
        }
    }
}

impl McConfig {
    pub fn with_samples(mut self, m: usize) -> Self {
        self.samples = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_substeps(mut self, k: usize) -> Self {
        self.substeps = k;
        self
    }

    pub fn with_basis_measure(mut self, m: AtomicMeasure) -> Self {
        self.basis_measure = Some(m);
        self
    }

    pub fn with_mode(mut self, mode: PathMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::config("samples", "need at least 2"));
        }
        if self.antithetic && self.samples % 2 != 0 {
            return Err(Error::config("samples", "antithetic pairs need an even count"));
        }
        if self.degree < 1 {
            return Err(Error::config("degree", "must be at least 1"));
        }
        if self.substeps < 1 {
            return Err(Error::config("substeps", "must be at least 1"));
        }
        if self.blocks < 1 {
            return Err(Error::config("blocks", "must be at least 1"));
        }
        Ok(())
    }
}

/// Mean and standard error of per-path values (pair means when antithetic).
pub(crate) fn mean_se(v: &[f64], antithetic: bool) -> (f64, f64) {
    let units: Vec<f64> = if antithetic {
        v.chunks(2).map(|p| p.iter().sum::<f64>() / p.len() as f64).collect()
    } else {
        v.to_vec()
    };
    let k = units.len() as f64;
    let mean = units.iter().sum::<f64>() / k;
    if units.len() < 2 {
        return (mean, 0.0);
    }
    let var = units.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}
