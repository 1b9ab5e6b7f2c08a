use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, TerminalSpec};
use crate::timegrid_paths::{Path, TimeGrid};

use super::bsde::{bsde_driver, solve_bsde_regression, terminal_values, McDriver};
use super::simulate::{simulate_frozen_sde, Control};
use super::McConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum HjbMethod {
    Single,
    /// Max over all slab-constant assignments; `best[j]` is the branch on slab `j`.
    Exhaustive { assignments: usize, best: Vec<usize> },
    /// Uncontrolled volatility: one BSDE whose driver is the pointwise sup.
    DriverSup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HjbEstimate {
    pub value: f64,
    pub se: f64,
    pub method: HjbMethod,
}

fn sigma_uncontrolled(f: &GeneratorSpec, horizon: f64) -> Result<bool> {
    let br = f.branches()?;
    let nf = f.features.len(f.dim);
    for t in [0.0, 0.37 * horizon, horizon] {
        for v in [-1.3, 0.0, 0.7, 2.9] {
            let phi = vec![v; nf];
            let s0 = (br[0].sigma)(t, &phi);
            if br[1..].iter().any(|b| (b.sigma)(t, &phi) != s0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `max_b [μ_b·z + r_b y + h_b(t, φ, y, w)] + shift` with `z` solved from `σᵀz = w`.
fn sup_driver(f: &GeneratorSpec) -> Result<McDriver> {
    let branches = f.branches()?.to_vec();
    let d = f.dim;
    let shift = f.shift;
    Ok(Arc::new(move |t, phi, y, w| {
        let sigma = (branches[0].sigma)(t, phi);
        let st = DMatrix::from_row_slice(d, d, &sigma).transpose();
        let z = st
            .lu()
            .solve(&DVector::from_column_slice(w))
            .map(|v| v.as_slice().to_vec())
            .unwrap_or_else(|| vec![0.0; d]);
        branches
            .iter()
            .map(|b| {
                let mu = (b.drift)(t, phi);
                let h = b.driver.as_ref().map_or(0.0, |dr| (dr.f)(t, phi, y, w));
                mu.iter().zip(&z).map(|(m, zv)| m * zv).sum::<f64>() + (b.discount)(t, phi) * y + h
            })
            .fold(f64::NEG_INFINITY, f64::max)
            + shift
    }))
}

pub(super) fn basis_cfg(g: &TerminalSpec, cfg: &McConfig) -> McConfig {
    let mut c = cfg.clone();
    if c.basis_measure.is_none() {
        if let Some(s) = &g.summary {
            if !s.measure.is_zero() {
                c.basis_measure = Some(s.measure.clone());
            }
        }
    }
    c
}

/// HJB value `sup_a Y^a_t` by Monte Carlo over the finite control set.
pub fn hjb_value_mc(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, query: (f64, &Path), cfg: &McConfig) -> Result<HjbEstimate> {
    let cfg = basis_cfg(g, cfg);
    let nb = f.branches()?.len();
    let solve = |control: Control, driver: &McDriver| -> Result<(f64, f64)> {
        let batch = simulate_frozen_sde(f, &control, grid, query, &cfg)?;
        let term = terminal_values(g, &batch)?;
        let est = solve_bsde_regression(driver, &term, &batch, &cfg)?;
        Ok((est.y, est.se))
    };
    if nb == 1 {
        let (value, se) = solve(Control::Branch(0), &bsde_driver(f, 0)?)?;
        return Ok(HjbEstimate {
            value,
            se,
            method: HjbMethod::Single,
        });
    }
    if sigma_uncontrolled(f, grid.horizon())? {
        let (value, se) = solve(Control::DiffusionOnly(0), &sup_driver(f)?)?;
        return Ok(HjbEstimate {
            value,
            se,
            method: HjbMethod::DriverSup,
        });
    }
    let n = grid.n();
    let i = grid.slab_index(query.0)?.min(n);
    let free = n - i;
    let assignments = (nb as u128).checked_pow(free as u32).unwrap_or(u128::MAX);
    if assignments > cfg.control_budget as u128 {
        return Err(Error::ControlBudget {
            assignments: assignments.min(usize::MAX as u128) as usize,
            budget: cfg.control_budget,
        });
    }
    let mut best = (f64::NEG_INFINITY, 0.0, Vec::new());
    for code in 0..assignments as usize {
        let mut per = vec![0; n];
        let mut c = code;
        for slot in per.iter_mut().skip(i) {
            *slot = c % nb;
            c /= nb;
        }
        // the driver follows the branch of the slab containing t
        let drivers: Vec<McDriver> = (0..nb).map(|b| bsde_driver(f, b)).collect::<Result<_>>()?;
        let grid_c = grid.clone();
        let per_c = per.clone();
        let driver: McDriver = Arc::new(move |t, phi, y, w| {
            let j = grid_c.slab_index(t).unwrap_or(0).min(per_c.len().saturating_sub(1));
            drivers[per_c[j]](t, phi, y, w)
        });
        let (v, se) = solve(Control::PerSlab(per.clone()), &driver)?;
        if v > best.0 {
            best = (v, se, per);
        }
    }
    Ok(HjbEstimate {
        value: best.0,
        se: best.1,
        method: HjbMethod::Exhaustive {
            assignments: assignments as usize,
            best: best.2,
        },
    })
}
