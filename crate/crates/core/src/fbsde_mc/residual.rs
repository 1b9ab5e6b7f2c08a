use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, TerminalSpec};
use crate::timegrid_paths::{Path, TimeGrid};

use super::bsde::{backward, bsde_driver, terminal_values};
use super::hjb::basis_cfg;
use super::regression::Projector;
use super::simulate::{simulate_frozen_sde, Control};
use super::{mean_se, McConfig};

/// Out-of-sample residual of the fitted value process along fresh trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub paths: usize,
    /// `V_T − V_t − Σ W ΔW + Σ f Δt`, averaged.
    pub mean: f64,
    pub se: f64,
    /// `Σ ΔR ΔW`, averaged: the bracket of the residual with the driving noise.
    pub covariation: f64,
    pub covariation_se: f64,
    /// `E Σ |W_k| Δt`, the size of the stochastic integrand.
    pub integrand_scale: f64,
}

impl ResidualReport {
    pub fn mean_ok(&self) -> bool {
        self.mean.abs() <= 3.0 * self.se
    }

    pub fn relative_covariation(&self) -> f64 {
        self.covariation.abs() / self.integrand_scale.max(1e-12)
    }
}

/// Fits `Y` and `W = σᵀZ` by regression on `cfg.samples` paths, then accumulates
/// `ΔR_k = V_{k+1} − Ŷ_k − W_k ΔW_k` on `fresh` independent paths (seed `fresh_seed`),
/// where `V_k = Ŷ_k + Δt f(t_k, φ_k, Ŷ_k, W_k)` and `V_N = g`.
pub fn martingale_residual(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grid: &TimeGrid,
    query: (f64, &Path),
    cfg: &McConfig,
    fresh: usize,
    fresh_seed: u64,
) -> Result<ResidualReport> {
    if f.branches()?.len() != 1 {
        return Err(Error::Unsupported("the residual check needs an uncontrolled generator".into()));
    }
    let cfg = basis_cfg(g, cfg);
    let train = simulate_frozen_sde(f, &Control::Branch(0), grid, query, &cfg)?;
    let driver = bsde_driver(f, 0)?;
    let proj = Projector::new(&train, &cfg)?;
    let (_, coefs) = backward(&driver, &terminal_values(g, &train)?, &train, &proj)?;

    let test_cfg = cfg.clone().with_samples(fresh).with_seed(fresh_seed);
    let test = simulate_frozen_sde(f, &Control::Branch(0), grid, query, &test_cfg)?;
    let gt = terminal_values(g, &test)?;
    let steps = test.steps();
    let d = test.dim;
    let per_path: Vec<(f64, f64, f64)> = (0..test.samples)
        .into_par_iter()
        .map(|m| {
            let at = |k: usize| -> (f64, Vec<f64>, f64) {
                let t = test.times[k];
                let dt = test.times[k + 1] - t;
                let y = proj.predict(&test, m, k, &coefs[k].y);
                let w: Vec<f64> = coefs[k].w.iter().map(|c| proj.predict(&test, m, k, c)).collect();
                let v = y + dt * driver(t, test.phi(m, k), y, &w);
                (y, w, v)
            };
            let (mut r, mut c, mut s) = (0.0, 0.0, 0.0);
            let mut cur = at(0);
            for k in 0..steps {
                let dt = test.times[k + 1] - test.times[k];
                let next = if k + 1 < steps { Some(at(k + 1)) } else { None };
                let v_next = next.as_ref().map_or(gt[m], |n| n.2);
                let dw = test.dw(m, k);
                let mart: f64 = (0..d).map(|a| cur.1[a] * dw[a]).sum();
                let dr = v_next - cur.0 - mart;
                r += dr;
                c += dr * dw.iter().sum::<f64>();
                s += dt * cur.1.iter().map(|w| w * w).sum::<f64>().sqrt();
                if let Some(n) = next {
                    cur = n;
                }
            }
            (r, c, s)
        })
        .collect();
    let rs: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let cs: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    let (mean, se) = mean_se(&rs, test.antithetic);
    let (covariation, covariation_se) = mean_se(&cs, test.antithetic);
    let integrand_scale = per_path.iter().map(|p| p.2).sum::<f64>() / per_path.len() as f64;
    Ok(ResidualReport {
        paths: test.samples,
        mean,
        se,
        covariation,
        covariation_se,
        integrand_scale,
    })
}
