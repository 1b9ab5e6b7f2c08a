use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{freeze, terminal_on_key, FrozenKey, GeneratorSpec, TerminalSpec};
use crate::timegrid_paths::{Path, TimeGrid};

use super::mesh::SlabMesh;
use super::scheme::{march, pick_dt};
use super::{radius_for, FdConfig};

struct Nested<'a> {
    f: &'a GeneratorSpec,
    g: &'a TerminalSpec,
    grid: &'a TimeGrid,
    cfg: &'a FdConfig,
    mesh: SlabMesh,
    xs: Vec<f64>,
    samples: Vec<f64>,
}

/// Cubic Lagrange weights of `x` on the 4 sample nodes nearest to it.
fn lagrange4(samples: &[f64], x: f64) -> (usize, [f64; 4]) {
    let h = samples[1] - samples[0];
    let u = (x - samples[0]) / h;
    let k0 = (u.floor() as isize - 1).clamp(0, samples.len() as isize - 4) as usize;
    let mut w = [1.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        for b in 0..4 {
            if a != b {
                *wa *= (u - (k0 + b) as f64) / (a as f64 - b as f64);
            }
        }
    }
    (k0, w)
}

impl Nested<'_> {
    /// Field of slab `key.slab` at `t_start` (on the shared mesh).
    fn slab_field(&self, key: &FrozenKey, t_start: f64) -> Result<Vec<f64>> {
        let j = key.slab;
        let n = self.grid.n();
        let t_end = self.grid.point(j + 1);
        let terminal: Vec<f64> = if j + 1 == n {
            self.xs
                .iter()
                .map(|&x| terminal_on_key(self.g, self.grid, &key.extended(self.grid, &[x])?, self.cfg.mode))
                .collect::<Result<_>>()?
        } else {
            let fields: Vec<Vec<f64>> = self
                .samples
                .par_iter()
                .map(|&xi| {
                    let next = key.extended(self.grid, &[xi])?;
                    self.slab_field(&next, t_end)
                })
                .collect::<Result<_>>()?;
            self.xs
                .iter()
                .enumerate()
                .map(|(jx, &x)| {
                    let (k0, w) = lagrange4(&self.samples, x);
                    (0..4).map(|a| w[a] * fields[k0 + a][jx]).sum()
                })
                .collect()
        };
        let frozen = freeze(self.f, self.grid, key, self.cfg.mode)?;
        let feats = |t: f64| frozen.features(t);
        let dt = pick_dt(self.cfg, self.f, &feats, (t_start, t_end), 1)?;
        let mut mesh = self.mesh.clone();
        mesh.dt = dt;
        march(self.f, &feats, &mesh, terminal, t_end, t_start, self.cfg.scheme)
    }
}

/// `v^n(t, x)` by the full nested recursion over key extensions. Each slab's terminal
/// field is glued from the next slab solved at `key_nodes` sampled key extensions,
/// interpolated (piecewise cubic) in the new key entry.
pub fn solve_vn_exact(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, query: (f64, &Path), cfg: &FdConfig) -> Result<f64> {
    let (t, x) = query;
    if f.dim != 1 || g.dim != 1 || x.dim() != 1 {
        return Err(Error::Dim("the nested solver is one-dimensional".into()));
    }
    let n = grid.n();
    if n > cfg.max_exact_level {
        return Err(Error::LevelTooDeep {
            n,
            max: cfg.max_exact_level,
        });
    }
    if cfg.key_nodes < 4 {
        return Err(Error::Config {
            field: "key_nodes".into(),
            msg: "at least 4 key samples are needed".into(),
        });
    }
    let i = grid.slab_index(t)?;
    let key = FrozenKey::from_path(grid, x, i)?;
    if i == n {
        return terminal_on_key(g, grid, &key, cfg.mode);
    }
    let c = x.value1(t);
    let radius = radius_for(cfg, f, t, x);
    let mesh = SlabMesh::new(vec![c], radius, cfg.dx, 1.0)?;
    let xs = mesh.nodes_1d();
    let kn = cfg.key_nodes;
    let samples = (0..kn)
        .map(|k| c - radius + 2.0 * radius * k as f64 / (kn - 1) as f64)
        .collect();
    let nested = Nested {
        f,
        g,
        grid,
        cfg,
        mesh,
        xs,
        samples,
    };
    let v = nested.slab_field(&key, t)?;
    Ok(v[(v.len() - 1) / 2])
}
