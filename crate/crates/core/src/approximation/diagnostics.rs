use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::generators::{GeneratorSpec, Modulus, TerminalSpec};
use crate::timegrid_paths::{dist_uniform, GridSequence, Path, TimeGrid};

use super::{approximate_solution, level_value, ApproxConfig, Backend, ConvergenceReport};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub query: usize,
    pub limit_a: f64,
    pub limit_b: f64,
    pub discrepancy: f64,
    /// `2 (bound_a + bound_b)` from the two fitted gap bounds.
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridIndependence {
    pub rows: Vec<GridRow>,
    pub reports: Vec<(ConvergenceReport, ConvergenceReport)>,
    pub max_discrepancy: f64,
}

impl GridIndependence {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.discrepancy <= r.tol)
    }

    /// Largest per-query tolerance.
    pub fn tol_grid(&self) -> f64 {
        self.rows.iter().map(|r| r.tol).fold(0.0, f64::max)
    }
}

/// Floor on the grid tolerance so identical limits never fail on rounding.
const GRID_TOL_FLOOR: f64 = 1e-9;

/// Limits on two grid sequences and their discrepancy per query.
pub fn grid_independence(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    a: (&GridSequence, RangeInclusive<usize>),
    b: (&GridSequence, RangeInclusive<usize>),
    queries: &[(f64, Path)],
    backend: &Backend,
    cfg: &ApproxConfig,
) -> Result<GridIndependence> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (q, (t, x)) in queries.iter().enumerate() {
        let ra = approximate_solution(f, g, a.0, (*t, x), a.1.clone(), backend, cfg)?;
        let rb = approximate_solution(f, g, b.0, (*t, x), b.1.clone(), backend, cfg)?;
        rows.push(GridRow {
            query: q,
            limit_a: ra.limit,
            limit_b: rb.limit,
            discrepancy: (ra.limit - rb.limit).abs(),
            tol: 2.0 * (ra.gap_bound + rb.gap_bound) + GRID_TOL_FLOOR,
        });
        reports.push((ra, rb));
    }
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    Ok(GridIndependence {
        rows,
        reports,
        max_discrepancy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LadderKind {
    Space,
    Time,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRow {
    pub kind: LadderKind,
    pub step: f64,
    /// `ρ_t(x, x')` for space rows, `t' − t` for time rows.
    pub distance: f64,
    pub diff: f64,
    /// Denominator of the ratio.
    pub scale: f64,
    /// `None` for `0/0` rungs.
    pub ratio: Option<f64>,
}

/// Ratios along a perturbation ladder, coarsest rung first.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusTable {
    pub kind: LadderKind,
    pub rows: Vec<LadderRow>,
}

impl ModulusTable {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    /// Largest ratio over the coarsest one (1 when the ladder is flat).
    pub fn variation(&self) -> f64 {
        let r = self.ratios();
        match r.first() {
            Some(&c) if c > 0.0 => self.max_ratio() / c,
            _ if self.max_ratio() == 0.0 => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// No blow-up: every ratio within `factor` times the coarsest rung.
    pub fn bounded(&self, factor: f64) -> bool {
        self.variation() <= factor
    }
}

/// Differences below `ROUNDOFF (1 + |v|)` count as zero.
const ROUNDOFF: f64 = 1e-12;

fn clean(diff: f64, base: f64) -> f64 {
    if diff <= ROUNDOFF * (1.0 + base.abs()) {
        0.0
    } else {
        diff
    }
}

fn ratio(diff: f64, scale: f64) -> Option<f64> {
    if scale > 0.0 {
        Some(diff / scale)
    } else if diff == 0.0 {
        None
    } else {
        Some(f64::INFINITY)
    }
}

/// `|v^n(t, x') − v^n(t, x)| / ϖ'(ρ_t(x, x'))` with `x' = x + ε 1_{[s,T]}`.
#[allow(clippy::too_many_arguments)]
pub fn space_ladder(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grid: &TimeGrid,
    backend: &Backend,
    query: (f64, &Path),
    bump_from: f64,
    steps: &[f64],
    modulus: Modulus,
) -> Result<ModulusTable> {
    let (t, x) = query;
    let base = level_value(f, g, grid, query, backend)?.value;
    let rows = steps
        .par_iter()
        .map(|&eps| {
            let d = x.dim();
            let xp = x.bumped(bump_from.min(t), &vec![eps; d]);
            let v = level_value(f, g, grid, (t, &xp), backend)?.value;
            let dist = dist_uniform(x, &xp, t)?;
            let diff = clean((v - base).abs(), base);
            let scale = modulus.prime(dist);
            Ok(LadderRow {
                kind: LadderKind::Space,
                step: eps,
                distance: dist,
                diff,
                scale,
                ratio: ratio(diff, scale),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ModulusTable {
        kind: LadderKind::Space,
        rows,
    })
}

/// `|v^n(t', x_{t∧}) − v^n(t, x)| / ϖ'(|t' − t|^{1/2} [+ |π|^{1/4}])`.
#[allow(clippy::too_many_arguments)]
pub fn time_ladder(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grid: &TimeGrid,
    backend: &Backend,
    query: (f64, &Path),
    steps: &[f64],
    modulus: Modulus,
    mesh_term: bool,
) -> Result<ModulusTable> {
    let (t, x) = query;
    let base = level_value(f, g, grid, query, backend)?.value;
    let stopped = x.stopped(t);
    let extra = if mesh_term { grid.mesh().powf(0.25) } else { 0.0 };
    let rows = steps
        .par_iter()
        .map(|&h| {
            let tp = (t + h).min(grid.horizon());
            let v = level_value(f, g, grid, (tp, &stopped), backend)?.value;
            let diff = clean((v - base).abs(), base);
            let scale = modulus.prime((tp - t).sqrt() + extra);
            Ok(LadderRow {
                kind: LadderKind::Time,
                step: h,
                distance: tp - t,
                diff,
                scale,
                ratio: ratio(diff, scale),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ModulusTable {
        kind: LadderKind::Time,
        rows,
    })
}

/// Space and time tables at one level.
#[allow(clippy::too_many_arguments)]
pub fn modulus_check(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grid: &TimeGrid,
    backend: &Backend,
    query: (f64, &Path),
    ladder: &[f64],
    modulus: Modulus,
    mesh_term: bool,
) -> Result<(ModulusTable, ModulusTable)> {
    let space = space_ladder(f, g, grid, backend, query, 0.0, ladder, modulus)?;
    let time = time_ladder(f, g, grid, backend, query, ladder, modulus, mesh_term)?;
    Ok((space, time))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityRow {
    pub k: usize,
    pub limit: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub base_limit: f64,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    /// `(gap_k / gap_{k'}) · (k / k')` for consecutive rows; 1 for an exact `1/k` gap.
    pub fn order_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].gap / w[1].gap) * (w[0].k as f64 / w[1].k as f64))
            .collect()
    }

    pub fn ratio_test(&self, tol: f64) -> bool {
        !self.rows.is_empty() && self.order_ratios().iter().all(|r| (r - 1.0).abs() <= tol)
    }

    pub fn gaps_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap <= w[0].gap)
    }
}

/// Limits `ϑ_k` of a family `(F_k, g_k)` and their gaps to the limit `ϑ_0` of `base`.
#[allow(clippy::too_many_arguments)]
pub fn stability_experiment(
    family: &(dyn Fn(usize) -> (GeneratorSpec, TerminalSpec) + Sync),
    ks: &[usize],
    base: (&GeneratorSpec, &TerminalSpec),
    grids: &GridSequence,
    query: (f64, &Path),
    levels: RangeInclusive<usize>,
    backend: &Backend,
    cfg: &ApproxConfig,
) -> Result<StabilityReport> {
    let base_limit = approximate_solution(base.0, base.1, grids, query, levels.clone(), backend, cfg)?.limit;
    let rows = ks
        .par_iter()
        .map(|&k| {
            let (fk, gk) = family(k);
            let limit = approximate_solution(&fk, &gk, grids, query, levels.clone(), backend, cfg)?.limit;
            Ok(StabilityRow {
                k,
                limit,
                gap: (limit - base_limit).abs(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(StabilityReport { base_limit, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalRow {
    pub level: usize,
    pub query: usize,
    pub t: f64,
    pub value: f64,
    pub exact: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalReport {
    pub rows: Vec<ClassicalRow>,
}

impl ClassicalReport {
    pub fn max_gap(&self, level: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.level == level)
            .map(|r| r.gap)
            .fold(0.0, f64::max)
    }

    pub fn finest_max_gap(&self) -> f64 {
        let n = self.rows.iter().map(|r| r.level).max().unwrap_or(0);
        self.max_gap(n)
    }
}

/// `|v^n − w|` for a known classical solution `w` at every level and query.
pub fn classical_consistency(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    w: &(dyn Fn(f64, &Path) -> f64 + Sync),
    queries: &[(f64, Path)],
    grids: &GridSequence,
    levels: RangeInclusive<usize>,
    backend: &Backend,
) -> Result<ClassicalReport> {
    let jobs: Vec<(usize, usize)> = levels
        .flat_map(|n| (0..queries.len()).map(move |q| (n, q)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, q)| {
            let grid = grids.level(n)?;
            let (t, x) = &queries[q];
            let value = level_value(f, g, &grid, (*t, x), backend)?.value;
            let exact = w(*t, x);
            Ok(ClassicalRow {
                level: n,
                query: q,
                t: *t,
                value,
                exact,
                gap: (value - exact).abs(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ClassicalReport { rows })
}
