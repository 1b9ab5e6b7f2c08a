use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{freeze, FrozenKey, GeneratorSpec, PathFeatures};
use crate::timegrid_paths::{grid_values, Path, PathMode, TimeGrid};

use super::McConfig;

/// Which branch drives the forward dynamics.
#[derive(Clone, Debug, PartialEq)]
pub enum Control {
    Branch(usize),
    /// One branch per grid slab (entries before the start slab are ignored).
    PerSlab(Vec<usize>),
    /// Volatility of the given branch, zero drift.
    DiffusionOnly(usize),
}

impl Control {
    fn branch(&self, slab: usize) -> usize {
        match self {
            Control::Branch(b) | Control::DiffusionOnly(b) => *b,
            Control::PerSlab(v) => v[slab],
        }
    }
}

/// Feature values as a linear map of the key: `φ_a = Σ_l c_l key_{l,a}`.
#[derive(Clone, Debug)]
pub(crate) enum FeatureMap {
    Empty,
    Linear(Vec<Vec<f64>>),
    Generic,
}

/// `M` Euler trajectories on the lattice made of the grid points and `substeps`
/// points per slab, from the start time to the horizon.
#[derive(Clone, Debug)]
pub struct SamplePathBatch {
    pub grid: TimeGrid,
    pub mode: PathMode,
    pub dim: usize,
    pub n_features: usize,
    pub samples: usize,
    pub antithetic: bool,
    pub start_slab: usize,
    pub times: Vec<f64>,
    pub slab_of_step: Vec<usize>,
    /// Lattice step of each grid point after the start slab.
    pub grid_step: Vec<Option<usize>>,
    pub(crate) features: FeatureMap,
    x: Vec<f64>,
    dw: Vec<f64>,
    keys: Vec<f64>,
    phi: Vec<f64>,
}

impl SamplePathBatch {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn x(&self, m: usize, k: usize) -> &[f64] {
        let d = self.dim;
        let o = (m * (self.steps() + 1) + k) * d;
        &self.x[o..o + d]
    }

    pub fn dw(&self, m: usize, k: usize) -> &[f64] {
        let d = self.dim;
        let o = (m * self.steps() + k) * d;
        &self.dw[o..o + d]
    }

    /// Grid values `(x_{t_0}, ..., x_{t_n})` of trajectory `m`.
    pub fn key(&self, m: usize) -> &[f64] {
        let w = (self.grid.n() + 1) * self.dim;
        &self.keys[m * w..(m + 1) * w]
    }

    /// Features read by the coefficients at step `k`.
    pub fn phi(&self, m: usize, k: usize) -> &[f64] {
        let nf = self.n_features;
        let o = (m * self.steps() + k) * nf;
        &self.phi[o..o + nf]
    }

    pub fn terminal_x(&self, m: usize) -> &[f64] {
        self.x(m, self.steps())
    }

    pub fn increments(&self) -> &[f64] {
        &self.dw
    }

    /// Coefficients `c_l` of the linear feature map at step `k`, when there is one.
    pub fn feature_coeffs(&self, k: usize) -> Option<&[f64]> {
        match &self.features {
            FeatureMap::Linear(c) => Some(&c[k]),
            _ => None,
        }
    }
}

fn lattice(grid: &TimeGrid, t: f64, substeps: usize) -> Result<(Vec<f64>, Vec<usize>, Vec<Option<usize>>, usize)> {
    let n = grid.n();
    let i = grid.slab_index(t)?;
    let mut times = vec![t];
    let mut slabs = Vec::new();
    let mut grid_step = vec![None; n + 1];
    for j in i..n {
        let a = t.max(grid.point(j));
        let b = grid.point(j + 1);
        let full = b - grid.point(j);
        let k = ((substeps as f64 * (b - a) / full) - 1e-9).ceil().max(1.0) as usize;
        for s in 1..=k {
            times.push(if s == k { b } else { a + (b - a) * s as f64 / k as f64 });
            slabs.push(j);
        }
        grid_step[j + 1] = Some(times.len() - 1);
    }
    Ok((times, slabs, grid_step, i))
}

fn feature_map(spec: &GeneratorSpec, grid: &TimeGrid, mode: PathMode, times: &[f64], slabs: &[usize]) -> Result<FeatureMap> {
    match &spec.features {
        PathFeatures::None => Ok(FeatureMap::Empty),
        PathFeatures::Custom { .. } => Ok(FeatureMap::Generic),
        PathFeatures::RunningIntegral(lambda) => {
            let n = grid.n();
            let mut out = Vec::with_capacity(slabs.len());
            for (k, &j) in slabs.iter().enumerate() {
                let mut c = Vec::with_capacity(j + 1);
                for l in 0..=j {
                    let mut e = vec![0.0; j + 1];
                    e[l] = 1.0;
                    let p = Path::from_grid_values(grid, &e, 1, mode)?;
                    c.push(lambda.integrate_upto(&p, times[k])[0]);
                }
                out.push(c);
            }
            debug_assert!(slabs.iter().all(|&j| j < n));
            Ok(FeatureMap::Linear(out))
        }
    }
}

/// Euler–Maruyama driven by the given increments (`M × steps × d`, row-major).
/// Coefficients at step `k` read only the key up to the slab of `k`.
pub fn simulate_with_increments(
    spec: &GeneratorSpec,
    control: &Control,
    grid: &TimeGrid,
    start: (f64, &Path),
    dw: Vec<f64>,
    cfg: &McConfig,
) -> Result<SamplePathBatch> {
    cfg.validate()?;
    let (t, x0) = start;
    let d = spec.dim;
    if x0.dim() != d {
        return Err(Error::Dim(format!("start path in dimension {}, generator in {d}", x0.dim())));
    }
    let branches = spec.branches()?;
    let n = grid.n();
    let (times, slabs, grid_step, i) = lattice(grid, t, cfg.substeps)?;
    let steps = times.len() - 1;
    let m_total = cfg.samples;
    if dw.len() != m_total * steps * d {
        return Err(Error::config("increments", format!("expected {} values, got {}", m_total * steps * d, dw.len())));
    }
    for j in i..n {
        let b = control.branch(j);
        if b >= branches.len() {
            return Err(Error::config("control", format!("branch {b} of {}", branches.len())));
        }
    }
    let features = feature_map(spec, grid, cfg.mode, &times, &slabs)?;
    let nf = spec.features.len(d);
    let head = grid_values(grid, x0, i);
    let start_x = x0.value(t);
    let diffusion_only = matches!(control, Control::DiffusionOnly(_));

    let width = (n + 1) * d;
    let mut xs = vec![0.0; m_total * (steps + 1) * d];
    let mut keys = vec![0.0; m_total * width];
    let pw = (steps * nf).max(1);
    let mut phis = vec![0.0; m_total * pw];
    xs.par_chunks_mut((steps + 1) * d)
        .zip(keys.par_chunks_mut(width))
        .zip(phis.par_chunks_mut(pw))
        .enumerate()
        .try_for_each(|(m, ((xm, km), pm))| -> Result<()> {
            km[..head.len()].copy_from_slice(&head);
            xm[..d].copy_from_slice(&start_x);
            let inc = &dw[m * steps * d..(m + 1) * steps * d];
            for k in 0..steps {
                let j = slabs[k];
                if j > i && grid_step[j] == Some(k) {
                    km[j * d..(j + 1) * d].copy_from_slice(&xm[k * d..(k + 1) * d]);
                }
                let r = times[k];
                let phi: Vec<f64> = match &features {
                    FeatureMap::Empty => Vec::new(),
                    FeatureMap::Linear(c) => (0..d)
                        .map(|a| c[k].iter().enumerate().map(|(l, cl)| cl * km[l * d + a]).sum())
                        .collect(),
                    FeatureMap::Generic => {
                        let key = FrozenKey::new(grid, j, d, km[..(j + 1) * d].to_vec())?;
                        freeze(spec, grid, &key, cfg.mode)?.features(r)
                    }
                };
                if nf > 0 {
                    pm[k * nf..(k + 1) * nf].copy_from_slice(&phi);
                }
                let br = &branches[control.branch(j)];
                let sigma = (br.sigma)(r, &phi);
                let h = times[k + 1] - r;
                let dwk = &inc[k * d..(k + 1) * d];
                let drift = if diffusion_only { vec![0.0; d] } else { (br.drift)(r, &phi) };
                for a in 0..d {
                    let mut v = xm[k * d + a] + drift[a] * h;
                    for b in 0..d {
                        v += sigma[a * d + b] * dwk[b];
                    }
                    if !v.is_finite() {
                        return Err(Error::Backend(format!("trajectory {m} overflowed at t = {r}")));
                    }
                    xm[(k + 1) * d + a] = v;
                }
            }
            if n > i {
                km[n * d..].copy_from_slice(&xm[steps * d..]);
            }
            Ok(())
        })?;
    if nf == 0 {
        phis.clear();
    }
    Ok(SamplePathBatch {
        grid: grid.clone(),
        mode: cfg.mode,
        dim: d,
        n_features: nf,
        samples: m_total,
        antithetic: cfg.antithetic,
        start_slab: i,
        times,
        slab_of_step: slabs,
        grid_step,
        features,
        x: xs,
        dw,
        keys,
        phi: phis,
    })
}

/// Gaussian increments `√Δt·N(0, I)` for `cfg.samples` paths; block `b` draws from
/// stream `b` of the seeded generator, antithetic pairs share a draw.
pub(crate) fn increments(times: &[f64], d: usize, cfg: &McConfig) -> Vec<f64> {
    let steps = times.len() - 1;
    let m = cfg.samples;
    let per = steps * d;
    let blocks = cfg.blocks.min(m / 2).max(1);
    let mut sizes = vec![m / blocks; blocks];
    for s in sizes.iter_mut().take(m % blocks) {
        *s += 1;
    }
    if cfg.antithetic {
        // keep pairs inside a block
        let mut carry = 0;
        for s in sizes.iter_mut() {
            *s += carry;
            carry = *s % 2;
            *s -= carry;
        }
    }
    let sq: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let mut out = vec![0.0; m * per];
    let mut chunks = Vec::with_capacity(blocks);
    let mut rest = &mut out[..];
    for s in &sizes {
        let (a, b) = rest.split_at_mut(s * per);
        chunks.push(a);
        rest = b;
    }
    chunks.into_par_iter().enumerate().for_each(|(b, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b as u64);
        let paths = chunk.len() / per.max(1);
        let mut p = 0;
        while p < paths {
            for k in 0..steps {
                for a in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    chunk[p * per + k * d + a] = z * sq[k];
                    if cfg.antithetic {
                        chunk[(p + 1) * per + k * d + a] = -z * sq[k];
                    }
                }
            }
            p += if cfg.antithetic { 2 } else { 1 };
        }
    });
    out
}

/// Simulates `cfg.samples` trajectories of the frozen SDE from `x_{t∧}`.
pub fn simulate_frozen_sde(spec: &GeneratorSpec, control: &Control, grid: &TimeGrid, start: (f64, &Path), cfg: &McConfig) -> Result<SamplePathBatch> {
    cfg.validate()?;
    let (times, ..) = lattice(grid, start.0, cfg.substeps)?;
    let dw = increments(&times, spec.dim, cfg);
    simulate_with_increments(spec, control, grid, start, dw, cfg)
}
