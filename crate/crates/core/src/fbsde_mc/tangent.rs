use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, PathFeatures, TerminalSpec};
use crate::slab_pde::lift_weights;
use crate::timegrid_paths::{grid_values, Path, PathMode, TimeGrid};

use super::bsde::{bsde_driver, solve_bsde_projected, terminal_values};
use super::regression::Projector;
use super::simulate::{simulate_frozen_sde, Control, SamplePathBatch};
use super::{mean_se, McConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct TangentEstimate {
    pub value: f64,
    pub value_se: f64,
    /// `∇Y_t` in the given direction.
    pub grad: f64,
    pub grad_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpEstimate {
    pub base: f64,
    pub bumped: f64,
    /// `(Y^{x+δh} − Y^x) / δ`.
    pub derivative: f64,
}

fn check_metadata(f: &GeneratorSpec, g: &TerminalSpec) -> Result<()> {
    if f.dim != 1 {
        return Err(Error::Unsupported("the tangent system is implemented for scalar paths".into()));
    }
    let br = f.branches()?;
    if br.len() != 1 {
        return Err(Error::Unsupported("the tangent system needs a single branch".into()));
    }
    if let PathFeatures::Custom { .. } = f.features {
        return Err(Error::Metadata("custom features have no Fréchet derivative".into()));
    }
    if !f.features.is_empty(1) && br[0].sensitivities.is_none() {
        return Err(Error::Metadata(format!("generator `{}` declares no coefficient sensitivities", f.name)));
    }
    if br[0].driver.as_ref().is_some_and(|d| d.partials.is_none()) {
        return Err(Error::Metadata(format!("generator `{}` declares no driver partials", f.name)));
    }
    if g.summary.is_none() && g.frechet.is_none() {
        return Err(Error::Metadata(format!("terminal `{}` declares no Fréchet derivative", g.name)));
    }
    Ok(())
}

/// Pathwise tangent `(∇X, ∇key)` of each trajectory for the direction's grid values.
fn tangent_paths(f: &GeneratorSpec, batch: &SamplePathBatch, head: &[f64], h_t: f64) -> (Vec<f64>, Vec<f64>) {
    let br = &f.branches().unwrap()[0];
    let steps = batch.steps();
    let n = batch.grid.n();
    let i = batch.start_slab;
    let m = batch.samples;
    let mut dx = vec![0.0; m * (steps + 1)];
    let mut dkey = vec![0.0; m * (n + 1)];
    dx.par_chunks_mut(steps + 1)
        .zip(dkey.par_chunks_mut(n + 1))
        .enumerate()
        .for_each(|(p, (tx, tk))| {
            tk[..head.len()].copy_from_slice(head);
            tx[0] = h_t;
            for k in 0..steps {
                let j = batch.slab_of_step[k];
                if j > i && batch.grid_step[j] == Some(k) {
                    tk[j] = tx[k];
                }
                let mut step = tx[k];
                if let (Some(c), Some(s)) = (batch.feature_coeffs(k), &br.sensitivities) {
                    let dphi: f64 = c.iter().zip(tk.iter()).map(|(a, b)| a * b).sum();
                    let r = batch.times[k];
                    let phi = batch.phi(p, k);
                    let h = batch.times[k + 1] - r;
                    step += (s.drift_phi)(r, phi)[0] * dphi * h + (s.sigma_phi)(r, phi)[0] * dphi * batch.dw(p, k)[0];
                }
                tx[k + 1] = step;
            }
            if n > i {
                tk[n] = tx[steps];
            }
        });
    (dx, dkey)
}

fn terminal_tangent(g: &TerminalSpec, batch: &SamplePathBatch, dkey: &[f64]) -> Result<Vec<f64>> {
    let n = batch.grid.n();
    if let Some(s) = &g.summary {
        let w = lift_weights(&s.measure, &batch.grid, batch.mode);
        return Ok((0..batch.samples)
            .into_par_iter()
            .map(|m| {
                let key = batch.key(m);
                let dk = &dkey[m * (n + 1)..(m + 1) * (n + 1)];
                let stat: f64 = w.iter().zip(key).map(|(a, b)| a * b).sum();
                let dstat: f64 = w.iter().zip(dk).map(|(a, b)| a * b).sum();
                let (gs, gx) = s.grad(stat, key[n]);
                gs * dstat + gx * dk[n]
            })
            .collect());
    }
    let fr = g.frechet.as_ref().unwrap();
    (0..batch.samples)
        .into_par_iter()
        .map(|m| {
            let x = Path::from_grid_values(&batch.grid, batch.key(m), 1, batch.mode)?;
            let h = Path::from_grid_values(&batch.grid, &dkey[m * (n + 1)..(m + 1) * (n + 1)], 1, batch.mode)?;
            Ok(fr(&x).apply(&h))
        })
        .collect()
}

fn vertical_direction(horizon: f64, t: f64) -> Path {
    if t <= 0.0 {
        Path::constant(horizon, &[1.0], PathMode::CadlagPC).unwrap()
    } else {
        Path::scalar_pc(horizon, vec![0.0, t], vec![0.0, 1.0]).unwrap()
    }
}

/// `Y_t` and its derivative in direction `h` (default `1_{[t,T]}`) from the linear
/// tangent system simulated on the same draws and regressed with the same projector.
pub fn tangent_fbsde(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grid: &TimeGrid,
    query: (f64, &Path),
    direction: Option<&Path>,
    cfg: &McConfig,
) -> Result<TangentEstimate> {
    check_metadata(f, g)?;
    let (t, x) = query;
    let vertical = vertical_direction(x.horizon(), t);
    let hdir = direction.unwrap_or(&vertical);
    let batch = simulate_frozen_sde(f, &Control::Branch(0), grid, query, cfg)?;
    let proj = Projector::new(&batch, cfg)?;
    let head = grid_values(grid, hdir, batch.start_slab);
    let (_, dkey) = tangent_paths(f, &batch, &head, hdir.value1(t));
    let n = grid.n();
    // ∇φ at each step from the tangent key
    let dphi = |m: usize, k: usize| -> f64 {
        let dk = &dkey[m * (n + 1)..(m + 1) * (n + 1)];
        batch
            .feature_coeffs(k)
            .map_or(0.0, |c| c.iter().zip(dk).map(|(a, b)| a * b).sum())
    };
    let br = &f.branches()?[0];
    let driver = bsde_driver(f, 0)?;
    let mut r = terminal_values(g, &batch)?;
    let mut dr = terminal_tangent(g, &batch, &dkey)?;
    let mut ynext = r.clone();
    let mut dynext = dr.clone();
    let m = batch.samples;
    let has_phi = batch.n_features > 0;
    for k in (0..batch.steps()).rev() {
        let tk = batch.times[k];
        let dt = batch.times[k + 1] - tk;
        let fits = proj.fit(k, &[&r, &dr]);
        let (yhat, dyhat) = (&fits[0], &fits[1]);
        let res: Vec<f64> = (0..m).map(|i| (ynext[i] - yhat[i]) * batch.dw(i, k)[0] / dt).collect();
        let dres: Vec<f64> = (0..m).map(|i| (dynext[i] - dyhat[i]) * batch.dw(i, k)[0] / dt).collect();
        let wf = proj.fit(k, &[&res, &dres]);
        let (what, dwhat) = (&wf[0], &wf[1]);
        let incr: Vec<(f64, f64)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let phi = batch.phi(i, k);
                let w = [what[i]];
                let fv = driver(tk, phi, yhat[i], &w);
                let disc = (br.discount)(tk, phi);
                let mut dfv = disc * dyhat[i];
                let dp = if has_phi { dphi(i, k) } else { 0.0 };
                if has_phi {
                    let eps = 1e-6;
                    let dd = ((br.discount)(tk, &[phi[0] + eps]) - (br.discount)(tk, &[phi[0] - eps])) / (2.0 * eps);
                    dfv += dd * dp * yhat[i];
                }
                if let Some(d) = &br.driver {
                    let p = d.partials.as_ref().unwrap();
                    if has_phi {
                        dfv += (p.d_phi)(tk, phi, yhat[i], &w)[0] * dp;
                    }
                    dfv += (p.d_y)(tk, phi, yhat[i], &w) * dyhat[i];
                    dfv += (p.d_w)(tk, phi, yhat[i], &w)[0] * dwhat[i];
                }
                (fv, dfv)
            })
            .collect();
        for i in 0..m {
            r[i] += dt * incr[i].0;
            dr[i] += dt * incr[i].1;
            ynext[i] = yhat[i] + dt * incr[i].0;
            dynext[i] = dyhat[i] + dt * incr[i].1;
        }
    }
    let (value, value_se) = mean_se(&r, batch.antithetic);
    let (grad, grad_se) = mean_se(&dr, batch.antithetic);
    Ok(TangentEstimate {
        value,
        value_se,
        grad,
        grad_se,
    })
}

/// Forward difference `(Y^{x ⊞ δ} − Y^x)/δ` for the vertical bump at `t`, on common
/// draws and with the regression built on the unbumped batch.
pub fn bump_derivative(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, query: (f64, &Path), delta: f64, cfg: &McConfig) -> Result<BumpEstimate> {
    let (t, x) = query;
    let base = simulate_frozen_sde(f, &Control::Branch(0), grid, query, cfg)?;
    let xb = x.bumped(t, &[delta]);
    let bumped = simulate_frozen_sde(f, &Control::Branch(0), grid, (t, &xb), cfg)?;
    let proj = Projector::new(&base, cfg)?;
    let driver = bsde_driver(f, 0)?;
    let y0 = solve_bsde_projected(&driver, &terminal_values(g, &base)?, &base, &proj)?.y;
    let y1 = solve_bsde_projected(&driver, &terminal_values(g, &bumped)?, &bumped, &proj)?.y;
    Ok(BumpEstimate {
        base: y0,
        bumped: y1,
        derivative: (y1 - y0) / delta,
    })
}
