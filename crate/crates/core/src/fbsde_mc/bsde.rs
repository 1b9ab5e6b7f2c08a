use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{terminal_on_key, FrozenKey, GeneratorSpec, TerminalSpec};
use crate::slab_pde::lift_weights;

use super::regression::Projector;
use super::simulate::SamplePathBatch;
use super::{mean_se, McConfig};

/// Driver `f(t, φ, y, w)` with `w = σᵀz`.
pub type McDriver = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct BsdeEstimate {
    pub y: f64,
    pub se: f64,
    /// `σᵀZ` at the start.
    pub z: Vec<f64>,
    /// Sample mean of the fitted `σᵀZ` at every lattice step.
    pub z_steps: Vec<Vec<f64>>,
}

/// BSDE driver of one branch: `r y + h(t, φ, y, w) + shift`.
pub fn bsde_driver(spec: &GeneratorSpec, branch: usize) -> Result<McDriver> {
    let b = spec
        .branches()?
        .get(branch)
        .cloned()
        .ok_or_else(|| Error::config("control", format!("no branch {branch}")))?;
    let shift = spec.shift;
    Ok(Arc::new(move |t, phi, y, w| {
        let h = b.driver.as_ref().map_or(0.0, |d| (d.f)(t, phi, y, w));
        (b.discount)(t, phi) * y + h + shift
    }))
}

/// `g^n` on every trajectory of the batch (through the summary when declared).
pub fn terminal_values(g: &TerminalSpec, batch: &SamplePathBatch) -> Result<Vec<f64>> {
    if g.dim != batch.dim {
        return Err(Error::Dim(format!("terminal in dimension {}, paths in {}", g.dim, batch.dim)));
    }
    let n = batch.grid.n();
    if let (Some(s), 1) = (&g.summary, batch.dim) {
        let w = lift_weights(&s.measure, &batch.grid, batch.mode);
        return Ok((0..batch.samples)
            .into_par_iter()
            .map(|m| {
                let key = batch.key(m);
                let stat: f64 = w.iter().zip(key).map(|(a, b)| a * b).sum();
                (s.g0)(stat, key[n])
            })
            .collect());
    }
    (0..batch.samples)
        .into_par_iter()
        .map(|m| {
            let key = FrozenKey::new(&batch.grid, n, batch.dim, batch.key(m).to_vec())?;
            terminal_on_key(g, &batch.grid, &key, batch.mode)
        })
        .collect()
}

/// Least-squares backward induction with its own projector.
pub fn solve_bsde_regression(driver: &McDriver, terminal: &[f64], batch: &SamplePathBatch, cfg: &McConfig) -> Result<BsdeEstimate> {
    let proj = Projector::new(batch, cfg)?;
    solve_bsde_projected(driver, terminal, batch, &proj)
}

/// Backward induction `Y_k⁻ = E_k[R_{k+1}]`, `R_k = R_{k+1} + Δt f(t_k, φ_k, Y_k⁻, W_k)`
/// with `W_k = E_k[(Ŷ_{k+1} − Y_k⁻) ΔW_k] / Δt`, `Ŷ_{k+1}` the fitted one-step value. The
/// conditional expectations use `proj`, which may come from another batch on the
/// same draws (common regression for bumped solves).
pub fn solve_bsde_projected(driver: &McDriver, terminal: &[f64], batch: &SamplePathBatch, proj: &Projector) -> Result<BsdeEstimate> {
    Ok(backward(driver, terminal, batch, proj)?.0)
}

/// Basis coefficients of the fitted `Y_k⁻` and of each component of `W_k`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct StepCoefficients {
    pub y: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

pub(crate) fn backward(
    driver: &McDriver,
    terminal: &[f64],
    batch: &SamplePathBatch,
    proj: &Projector,
) -> Result<(BsdeEstimate, Vec<StepCoefficients>)> {
    let m = batch.samples;
    let d = batch.dim;
    if terminal.len() != m {
        return Err(Error::config("terminal", format!("{} values for {m} paths", terminal.len())));
    }
    if proj.batch().samples != m || proj.batch().steps() != batch.steps() {
        return Err(Error::config("projector", "built on a batch of another shape"));
    }
    let steps = batch.steps();
    let mut r = terminal.to_vec();
    let mut ynext = terminal.to_vec();
    let mut z_steps = vec![Vec::new(); steps];
    let mut z0 = vec![0.0; d];
    let mut coefs = vec![
        StepCoefficients {
            y: Vec::new(),
            w: Vec::new(),
        };
        steps
    ];
    for k in (0..steps).rev() {
        let t = batch.times[k];
        let dt = batch.times[k + 1] - t;
        let (mut yfit, mut ycoef) = proj.fit_with_coefficients(k, &[&r]);
        let yhat = yfit.pop().unwrap();
        let resid: Vec<Vec<f64>> = (0..d)
            .map(|a| (0..m).map(|i| (ynext[i] - yhat[i]) * batch.dw(i, k)[a] / dt).collect())
            .collect();
        let refs: Vec<&[f64]> = resid.iter().map(|v| v.as_slice()).collect();
        let (what, wcoef) = proj.fit_with_coefficients(k, &refs);
        coefs[k] = StepCoefficients {
            y: ycoef.pop().unwrap(),
            w: wcoef,
        };
        let f: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| {
                let w: Vec<f64> = (0..d).map(|a| what[a][i]).collect();
                driver(t, batch.phi(i, k), yhat[i], &w)
            })
            .collect();
        for i in 0..m {
            r[i] += dt * f[i];
            ynext[i] = yhat[i] + dt * f[i];
        }
        z_steps[k] = (0..d).map(|a| what[a].iter().sum::<f64>() / m as f64).collect();
        if k == 0 {
            z0 = z_steps[0].clone();
        }
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Backend("non-finite backward value".into()));
    }
    let (y, se) = mean_se(&r, batch.antithetic);
    Ok((BsdeEstimate { y, se, z: z0, z_steps }, coefs))
}
