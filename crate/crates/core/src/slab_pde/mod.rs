//! Monotone finite differences for the slab PDEs and the backward recursion over
//! slabs: a Markovian lift for summary-form data and a brute-force nested solver.

mod comparison;
mod exact;
mod lift;
mod mesh;
mod scheme;

pub use comparison::{comparison_check, comparison_premise, ComparisonReport, PremiseReport, TOL_MONOTONE};
pub use exact::solve_vn_exact;
pub use lift::{lift_weights, solve_vn_lift, LiftField, LiftSolution};
pub use mesh::{SlabMesh, ValueField};
pub use scheme::{explicit_dt_limit, solve_slab, Scheme, POLICY_MAX_SWEEPS, POLICY_TOL};

use crate::generators::GeneratorSpec;
use crate::timegrid_paths::{Path, PathMode};

#[derive(Clone, Debug, PartialEq)]
pub struct FdConfig {
    pub dx: f64,
    /// Mesh half-width; `None` uses `max(6σ̄√T, 4‖x‖ + 4)`.
    pub radius: Option<f64>,
    /// Time step; `None` uses `cfl_fraction` of the explicit limit (or `dx` for the
    /// implicit scheme).
    pub dt: Option<f64>,
    pub cfl_fraction: f64,
    pub scheme: Scheme,
    pub mode: PathMode,
    /// Key-extension samples per slab in the nested solver.
    pub key_nodes: usize,
    pub max_exact_level: usize,
    /// Cap on summary-statistic nodes per slab in the lift.
    pub max_s_nodes: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            dx: 0.05,
            radius: None,
            dt: None,
            cfl_fraction: 0.9,
            scheme: Scheme::Explicit,
            mode: PathMode::CadlagPC,
            key_nodes: 17,
            max_exact_level: 4,
            max_s_nodes: 4001,
        }
    }
}

impl FdConfig {
    pub fn with_dx(mut self, dx: f64) -> Self {
        self.dx = dx;
        self
    }

    pub fn with_mode(mut self, mode: PathMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_scheme(mut self, s: Scheme) -> Self {
        self.scheme = s;
        self
    }
}

/// Volatility scale used for the truncation radius: the largest branch volatility
/// over a few feature values, including those of the query path.
pub(crate) fn sigma_scale(f: &GeneratorSpec, t: f64, x: &Path) -> f64 {
    let nf = f.features.len(f.dim);
    let mut phis: Vec<Vec<f64>> = [-10.0, -1.0, 0.0, 1.0, 10.0].iter().map(|&v| vec![v; nf]).collect();
    if f.branches().is_ok() {
        phis.push(f.features.eval(t, x));
    }
    phis.iter()
        .map(|p| f.sigma_max(t, p))
        .fold(0.0, f64::max)
}

pub(crate) fn radius_for(cfg: &FdConfig, f: &GeneratorSpec, t: f64, x: &Path) -> f64 {
    let r = cfg.radius.unwrap_or_else(|| {
        let horizon = x.horizon();
        (6.0 * sigma_scale(f, t, x) * horizon.sqrt()).max(4.0 * x.sup_norm() + 4.0)
    });
    SlabMesh::snap_radius(r, cfg.dx)
}
