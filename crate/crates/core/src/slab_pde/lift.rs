use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{terminal_on_key, FrozenKey, GeneratorSpec, PathFeatures, TerminalSpec};
use crate::timegrid_paths::{grid_values, AtomicMeasure, Path, PathMode, TimeGrid};

use super::mesh::SlabMesh;
use super::scheme::{march, pick_dt};
use super::{radius_for, FdConfig};

/// `w_k = ∫ e_k dλ` where `e_k` is the projected indicator of grid point `k`:
/// `λ([t_k, t_{k+1}))` (and `λ({T})` for `k = n`) in PC mode, hat integrals in PL mode.
pub fn lift_weights(lambda: &AtomicMeasure, grid: &TimeGrid, mode: PathMode) -> Vec<f64> {
    let n = grid.n();
    (0..=n)
        .map(|k| {
            let mut e = vec![0.0; n + 1];
            e[k] = 1.0;
            let p = Path::from_grid_values(grid, &e, 1, mode).unwrap();
            lambda.integrate_upto(&p, grid.horizon())[0]
        })
        .collect()
}

/// Values of slab `slab` at `time` on the lattice `s_origin + k·ds` (`k < s_count`)
/// times the spatial mesh; stored `s`-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftField {
    pub slab: usize,
    pub time: f64,
    pub s_origin: f64,
    pub ds: f64,
    pub s_count: usize,
    pub mesh: SlabMesh,
    pub values: Vec<f64>,
}

impl LiftField {
    pub fn s_node(&self, k: usize) -> f64 {
        self.s_origin + k as f64 * self.ds
    }

    /// Linear interpolation in `s` at spatial node `j` (clamped to the lattice).
    pub fn interp_s(&self, s: f64, j: usize) -> f64 {
        let m = self.mesh.side();
        if self.s_count == 1 {
            return self.values[j];
        }
        let u = ((s - self.s_origin) / self.ds).clamp(0.0, (self.s_count - 1) as f64);
        let k = (u.floor() as usize).min(self.s_count - 2);
        let w = u - k as f64;
        let w = if w < 1e-9 { 0.0 } else if w > 1.0 - 1e-9 { 1.0 } else { w };
        (1.0 - w) * self.values[k * m + j] + w * self.values[(k + 1) * m + j]
    }

    /// Tabular dump: one `s, x…, value` row per lattice node.
    pub fn dump(&self) -> String {
        let m = self.mesh.len();
        let mut out = format!("# slab: {}\n# t: {}\n", self.slab, self.time);
        for k in 0..self.s_count {
            for j in 0..m {
                let xs: Vec<String> = self.mesh.node(j).iter().map(|c| c.to_string()).collect();
                out.push_str(&format!("{}, {}, {}\n", self.s_node(k), xs.join(", "), self.values[k * m + j]));
            }
        }
        out
    }

    pub fn same_layout(&self, other: &LiftField) -> bool {
        self.slab == other.slab
            && self.s_count == other.s_count
            && (self.s_origin - other.s_origin).abs() <= 1e-12 * (1.0 + self.s_origin.abs())
            && (self.ds - other.ds).abs() <= 1e-15 * (1.0 + self.ds)
            && self.mesh.same_nodes(&other.mesh)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftSolution {
    pub value: f64,
    /// Slab-start fields, slab of the query first (its field is at the query time).
    pub fields: Vec<LiftField>,
    pub weights: Vec<f64>,
    /// `max |v| / (1 + |s|/W + |x|)` over all nodes, `W` the accumulated weight.
    pub growth: f64,
}

struct LiftPlan {
    measure: AtomicMeasure,
    f_reads_s: bool,
    g_reads_s: bool,
}

fn plan(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, mode: PathMode) -> Result<LiftPlan> {
    if f.dim != 1 || g.dim != 1 {
        return Err(Error::Dim("the lift handles scalar paths".into()));
    }
    let summary = g
        .summary
        .as_ref()
        .ok_or_else(|| Error::Summary(format!("terminal `{}` declares no summary structure", g.name)))?;
    let g_measure = summary.measure.clone();
    let g_reads_s = !g_measure.is_zero();
    match &f.features {
        PathFeatures::None => Ok(LiftPlan {
            measure: g_measure,
            f_reads_s: false,
            g_reads_s,
        }),
        PathFeatures::RunningIntegral(lf) => {
            if mode != PathMode::CadlagPC || !lf.is_purely_atomic() || !lf.atoms_on_grid(grid) {
                return Err(Error::Summary(format!(
                    "generator `{}` reads ∫x dλ; the lift needs PC mode and atoms of λ on the grid",
                    f.name
                )));
            }
            if g_reads_s && g_measure != *lf {
                return Err(Error::Summary(
                    "generator and terminal read different measures".into(),
                ));
            }
            Ok(LiftPlan {
                measure: lf.clone(),
                f_reads_s: true,
                g_reads_s,
            })
        }
        PathFeatures::Custom { .. } => Err(Error::Summary(format!(
            "generator `{}` has custom path features",
            f.name
        ))),
    }
}

/// `v^n(t, x)` through the Markovian lift in `(s, x)`, `s = Σ_{k ≤ i} w_k x_{t_k}`.
pub fn solve_vn_lift(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, query: (f64, &Path), cfg: &FdConfig) -> Result<LiftSolution> {
    let (t, x) = query;
    let p = plan(f, g, grid, cfg.mode)?;
    if (x.horizon() - grid.horizon()).abs() > grid.tol() {
        return Err(Error::Path("query path and grid horizons differ".into()));
    }
    let n = grid.n();
    let w = lift_weights(&p.measure, grid, cfg.mode);
    let i = grid.slab_index(t)?;
    if i == n {
        let key = FrozenKey::from_path(grid, x, n)?;
        let value = terminal_on_key(g, grid, &key, cfg.mode)?;
        return Ok(LiftSolution {
            value,
            fields: vec![],
            weights: w,
            growth: 0.0,
        });
    }
    let summary = g.summary.as_ref().unwrap();
    let keyv = grid_values(grid, x, i);
    let s_q: f64 = keyv.iter().zip(&w).map(|(a, b)| a * b).sum();
    let c = x.value1(t);
    let radius = radius_for(cfg, f, t, x);
    let mesh0 = SlabMesh::new(vec![c], radius, cfg.dx, 1.0)?;
    let m = mesh0.side();
    let xs = mesh0.nodes_1d();

    // cumulative weights from the query slab on
    let mut cum = vec![0.0; n + 1];
    for j in i + 1..=n {
        cum[j] = cum[j - 1] + w[j];
    }
    let wmin = w[i + 1..].iter().copied().filter(|&v| v > 1e-15).fold(f64::INFINITY, f64::min);
    let mut ds = if wmin.is_finite() { wmin * cfg.dx } else { 1.0 };
    let span = |j: usize| cum[j] * 2.0 * radius;
    let max_count = (i..n).map(|j| (span(j) / ds).round() as usize + 1).max().unwrap_or(1);
    if max_count > cfg.max_s_nodes {
        ds *= ((max_count - 1) as f64 / (cfg.max_s_nodes - 1).max(1) as f64).ceil();
    }
    let layout = |j: usize| -> (f64, usize) {
        let count = (span(j) / ds).round() as usize + 1;
        (s_q + cum[j] * (c - radius), count)
    };

    let s_of = |s: f64| if p.g_reads_s { s } else { 0.0 };
    let mut fields: Vec<LiftField> = Vec::with_capacity(n - i);
    let mut next: Option<LiftField> = None;
    let mut growth: f64 = 0.0;
    for j in (i..n).rev() {
        let (origin, count) = layout(j);
        let t_end = grid.point(j + 1);
        let t_start = if j == i { t } else { grid.point(j) };
        let w_next = w[j + 1];
        let s_nodes: Vec<f64> = (0..count).map(|k| origin + k as f64 * ds).collect();
        let slabs: Vec<Result<Vec<f64>>> = s_nodes
            .par_iter()
            .map(|&s| {
                let terminal: Vec<f64> = match &next {
                    None => xs
                        .iter()
                        .map(|&xv| (summary.g0)(s_of(s + w_next * xv), xv))
                        .collect(),
                    Some(nf) => (0..m).map(|jx| nf.interp_s(s + w_next * xs[jx], jx)).collect(),
                };
                let feats = move |_: f64| if p.f_reads_s { vec![s] } else { Vec::new() };
                let dt = pick_dt(cfg, f, &feats, (t_start, t_end), 1)?;
                let mut mesh = mesh0.clone();
                mesh.dt = dt;
                march(f, &feats, &mesh, terminal, t_end, t_start, cfg.scheme)
            })
            .collect();
        let mut values = Vec::with_capacity(count * m);
        for r in slabs {
            values.extend(r?);
        }
        let wsum = cum[j] + w[..=i].iter().sum::<f64>();
        for (k, &s) in s_nodes.iter().enumerate() {
            for jx in 0..m {
                let denom = 1.0 + if wsum > 0.0 { s.abs() / wsum } else { 0.0 } + xs[jx].abs();
                growth = growth.max(values[k * m + jx].abs() / denom);
            }
        }
        let field = LiftField {
            slab: j,
            time: t_start,
            s_origin: origin,
            ds,
            s_count: count,
            mesh: mesh0.clone(),
            values,
        };
        fields.push(field.clone());
        next = Some(field);
    }
    fields.reverse();
    let top = &fields[0];
    let value = top.values[(m - 1) / 2];
    Ok(LiftSolution {
        value,
        fields,
        weights: w,
        growth,
    })
}
