//! The limit `ϑ = lim v^n` across grid levels: convergence reports with fitted
//! rates and extrapolation, and the diagnostics built on them (grid independence,
//! moduli, stability, classical consistency).

mod diagnostics;
pub mod fixtures;

pub use diagnostics::{
    classical_consistency, grid_independence, modulus_check, space_ladder, stability_experiment, time_ladder,
    ClassicalReport, ClassicalRow, GridIndependence, GridRow, LadderKind, LadderRow, ModulusTable, StabilityReport,
    StabilityRow,
};

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbsde_mc::{hjb_value_mc, McConfig};
use crate::generators::{GeneratorSpec, TerminalSpec};
use crate::slab_pde::{solve_vn_exact, solve_vn_lift, FdConfig};
use crate::timegrid_paths::{GridSequence, Path, TimeGrid};

/// How each `v^n` is computed.
#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    /// Markovian lift on the summary statistic (summary-form data only).
    Lift(FdConfig),
    /// Nested key recursion, shallow grids only.
    Exact(FdConfig),
    Mc(McConfig),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Lift(_) => "lift",
            Backend::Exact(_) => "exact",
            Backend::Mc(_) => "mc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Standard error, Monte Carlo only.
    pub se: Option<f64>,
}

/// `v^n(t, x)` on one grid.
pub fn level_value(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, query: (f64, &Path), backend: &Backend) -> Result<Estimate> {
    match backend {
        Backend::Lift(cfg) => Ok(Estimate {
            value: solve_vn_lift(f, g, grid, query, cfg)?.value,
            se: None,
        }),
        Backend::Exact(cfg) => Ok(Estimate {
            value: solve_vn_exact(f, g, grid, query, cfg)?,
            se: None,
        }),
        Backend::Mc(cfg) => {
            let h = hjb_value_mc(f, g, grid, query, cfg)?;
            Ok(Estimate {
                value: h.value,
                se: Some(h.se),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxConfig {
    /// The sequence counts as Cauchy when the last gap is below this.
    pub cauchy_tol: f64,
    pub rate_floor: f64,
    pub rate_slack: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig {
            cauchy_tol: 1e-2,
            rate_floor: 0.25,
            rate_slack: 0.0,
        }
    }
}

/// Least-squares fit of `log gap` against `log |π|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFit {
    Fitted { slope: f64, intercept: f64, residual: f64 },
    /// Every gap vanishes (to rounding): the levels agree.
    Exact,
    /// Fewer than two usable gaps.
    Insufficient,
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Fitted { slope, .. } => Some(*slope),
            RateFit::Exact => Some(f64::INFINITY),
            RateFit::Insufficient => None,
        }
    }
}

/// Gaps this small relative to the values count as zero.
const ZERO_GAP_RTOL: f64 = 1e-12;

fn is_zero_gap(gap: f64, scale: f64) -> bool {
    gap <= ZERO_GAP_RTOL * (1.0 + scale.abs())
}

/// Slope of `log gap` on `log mesh`; zero gaps are dropped.
pub fn fit_rate(meshes: &[f64], gaps: &[f64], scale: f64) -> RateFit {
    let pts: Vec<(f64, f64)> = meshes
        .iter()
        .zip(gaps)
        .filter(|(_, &g)| !is_zero_gap(g, scale))
        .map(|(&h, &g)| (h.ln(), g.ln()))
        .collect();
    if pts.is_empty() && !gaps.is_empty() {
        return RateFit::Exact;
    }
    if pts.len() < 2 {
        return RateFit::Insufficient;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return RateFit::Insufficient;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    RateFit::Fitted {
        slope,
        intercept,
        residual,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub sequence: String,
    pub backend: String,
    pub t: f64,
    pub levels: Vec<usize>,
    pub meshes: Vec<f64>,
    pub values: Vec<f64>,
    pub se: Vec<Option<f64>>,
    /// `gaps[k] = |v^{levels[k+1]} − v^{levels[k]}|`.
    pub gaps: Vec<f64>,
    pub rate: RateFit,
    /// Richardson value from the two finest levels with the fitted rate; equals
    /// the finest value when no positive finite rate is available.
    pub limit: f64,
    /// Predicted size of the next gap, `C |π^N|^p` from the fit (the last gap
    /// when unfitted).
    pub gap_bound: f64,
    pub cauchy: bool,
    pub rate_ok: bool,
}

impl ConvergenceReport {
    pub fn finest(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Assembles a report from per-level values (levels strictly increasing).
    pub fn from_values(
        sequence: &str,
        backend: &str,
        t: f64,
        levels: Vec<usize>,
        meshes: Vec<f64>,
        estimates: Vec<Estimate>,
        cfg: &ApproxConfig,
    ) -> Result<Self> {
        if levels.is_empty() || levels.len() != meshes.len() || levels.len() != estimates.len() {
            return Err(Error::config("levels", "need one value and mesh per level"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("levels", "must be strictly increasing"));
        }
        let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let se = estimates.iter().map(|e| e.se).collect();
        let gaps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rate = fit_rate(&meshes[1..], &gaps, scale);
        let finest = *values.last().unwrap();
        let (limit, gap_bound) = match rate {
            RateFit::Exact => (values[0], 0.0),
            RateFit::Fitted { slope, intercept, .. } if slope > 0.0 && slope.is_finite() => {
                let n = values.len();
                let r = meshes[n - 2] / meshes[n - 1];
                let lim = finest + (finest - values[n - 2]) / (r.powf(slope) - 1.0);
                (lim, (intercept + slope * meshes[n - 1].ln()).exp())
            }
            _ => (finest, gaps.last().copied().unwrap_or(0.0)),
        };
        let cauchy = gaps.last().is_some_and(|&g| g <= cfg.cauchy_tol) || matches!(rate, RateFit::Exact);
        let rate_ok = rate
            .slope()
            .is_some_and(|s| s >= cfg.rate_floor - cfg.rate_slack);
        Ok(ConvergenceReport {
            sequence: sequence.to_string(),
            backend: backend.to_string(),
            t,
            levels,
            meshes,
            values,
            se,
            gaps,
            rate,
            limit,
            gap_bound,
            cauchy,
            rate_ok,
        })
    }

    pub fn csv_rows(&self, path_id: &str) -> Vec<ConvergenceRow> {
        (0..self.levels.len())
            .map(|k| ConvergenceRow {
                n: self.levels[k],
                mesh: self.meshes[k],
                t: self.t,
                path_id: path_id.to_string(),
                value: self.values[k],
                gap_prev: (k > 0).then(|| self.gaps[k - 1]),
                se_if_mc: self.se[k],
            })
            .collect()
    }
}

/// One CSV row of a convergence run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mesh: f64,
    pub t: f64,
    pub path_id: String,
    pub value: f64,
    pub gap_prev: Option<f64>,
    pub se_if_mc: Option<f64>,
}

/// Serializes rows with a header line.
pub fn write_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Backend(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Backend(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Backend(e.to_string()))
}

/// `v^n(t, x)` for every level, the fitted rate and the extrapolated limit.
pub fn approximate_solution(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grids: &GridSequence,
    query: (f64, &Path),
    levels: RangeInclusive<usize>,
    backend: &Backend,
    cfg: &ApproxConfig,
) -> Result<ConvergenceReport> {
    let levels: Vec<usize> = levels.collect();
    if levels.is_empty() {
        return Err(Error::config("levels", "empty range"));
    }
    let grid_list: Vec<TimeGrid> = levels.iter().map(|&n| grids.level(n)).collect::<Result<_>>()?;
    let estimates: Vec<Estimate> = grid_list
        .par_iter()
        .map(|grid| level_value(f, g, grid, query, backend))
        .collect::<Result<_>>()?;
    let meshes = grid_list.iter().map(|g| g.mesh()).collect();
    ConvergenceReport::from_values(&grids.name(), backend.name(), query.0, levels, meshes, estimates, cfg)
}

/// Slope of the report's gaps against the mesh; needs at least three levels.
pub fn rate_diagnostic(report: &ConvergenceReport) -> Result<RateFit> {
    if report.levels.len() < 3 {
        return Err(Error::config("levels", "rate fit needs at least three levels"));
    }
    Ok(report.rate)
}
