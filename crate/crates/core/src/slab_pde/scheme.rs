use crate::error::{Error, Result};
use crate::generators::{BranchCoeffs, Driver, FrozenGenerator, GeneratorSpec};

use super::mesh::{SlabMesh, ValueField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    Explicit,
    /// Implicit Euler with Howard policy iteration per step (d = 1).
    ImplicitPolicy,
}

pub const POLICY_MAX_SWEEPS: usize = 50;
pub const POLICY_TOL: f64 = 1e-10;

/// Branch coefficients at one time (they do not depend on the spatial variable).
pub(crate) struct StepCoeffs<'a> {
    pub t: f64,
    pub phi: Vec<f64>,
    pub branches: Vec<BranchCoeffs>,
    pub drivers: Vec<Option<&'a Driver>>,
    pub shift: f64,
}

impl<'a> StepCoeffs<'a> {
    pub fn new(spec: &'a GeneratorSpec, t: f64, phi: Vec<f64>) -> Result<Self> {
        let bs = spec.branches()?;
        Ok(StepCoeffs {
            t,
            branches: bs.iter().map(|b| spec.coeffs(b, t, &phi)).collect(),
            drivers: bs.iter().map(|b| b.driver.as_ref()).collect(),
            phi,
            shift: spec.shift,
        })
    }

    fn driver_lips(&self, b: usize) -> (f64, f64) {
        self.drivers[b].map_or((0.0, 0.0), |d| (d.lip_y, d.lip_w))
    }

    #[inline]
    fn driver(&self, b: usize, y: f64, w: &[f64]) -> f64 {
        match self.drivers[b] {
            Some(d) => (d.f)(self.t, &self.phi, y, w),
            None => 0.0,
        }
    }
}

/// Largest rate `ρ` such that the explicit step is monotone for `dt ≤ 1/ρ`; errors
/// when no time step gives a monotone scheme.
pub(crate) fn explicit_rate(c: &StepCoeffs, dim: usize, dx: f64) -> Result<f64> {
    let dx2 = dx * dx;
    let mut rate: f64 = 0.0;
    for (b, bc) in c.branches.iter().enumerate() {
        let (ly, lw) = c.driver_lips(b);
        let r = match dim {
            1 => {
                let a = bc.a[0];
                if lw * bc.sigma[0].abs() * 0.5 / dx > a / dx2 * (1.0 + 1e-12) {
                    return Err(Error::Monotonicity(format!(
                        "driver gradient weight {} exceeds diffusion weight {} at dx = {dx}",
                        lw * bc.sigma[0].abs() * 0.5 / dx,
                        a / dx2
                    )));
                }
                2.0 * a / dx2 + bc.drift[0].abs() / dx
            }
            _ => {
                let (a11, a12, a22) = (bc.a[0], bc.a[1], bc.a[3]);
                if a12.abs() > a11.min(a22) * (1.0 + 1e-12) {
                    return Err(Error::Monotonicity(format!(
                        "cross diffusion |a12| = {} exceeds min(a11, a22) = {}",
                        a12.abs(),
                        a11.min(a22)
                    )));
                }
                for axis in 0..2 {
                    let col = (bc.sigma[axis * 2].powi(2) + bc.sigma[axis * 2 + 1].powi(2)).sqrt();
                    let diag = bc.a[axis * 3] - a12.abs();
                    if lw * col > 0.0 && lw * col * 0.5 / dx > diag / dx2 * (1.0 + 1e-12) {
                        return Err(Error::Monotonicity(format!(
                            "driver gradient weight exceeds diffusion weight on axis {axis}"
                        )));
                    }
                }
                2.0 * (a11 + a22 - a12.abs()) / dx2 + (bc.drift[0].abs() + bc.drift[1].abs()) / dx
            }
        };
        rate = rate.max(r + bc.discount.abs() + ly);
    }
    Ok(rate)
}

fn explicit_step_1d(c: &StepCoeffs, dx: f64, dt: f64, v: &[f64], out: &mut [f64]) {
    let m = v.len();
    let dx2 = dx * dx;
    for j in 0..m {
        let interior = j > 0 && j + 1 < m;
        let mut best = f64::NEG_INFINITY;
        for (b, bc) in c.branches.iter().enumerate() {
            let mu = bc.drift[0];
            let d2 = if interior { (v[j + 1] - 2.0 * v[j] + v[j - 1]) / dx2 } else { 0.0 };
            let g = if mu > 0.0 && j + 1 < m {
                (v[j + 1] - v[j]) / dx
            } else if mu < 0.0 && j > 0 {
                (v[j] - v[j - 1]) / dx
            } else {
                0.0
            };
            let mut val = bc.a[0] * d2 + mu * g + bc.discount * v[j];
            if c.drivers[b].is_some() {
                let z = if interior { (v[j + 1] - v[j - 1]) / (2.0 * dx) } else { 0.0 };
                val += c.driver(b, v[j], &[bc.sigma[0] * z]);
            }
            best = best.max(val);
        }
        out[j] = v[j] + dt * (best + c.shift);
    }
}

fn explicit_step_2d(c: &StepCoeffs, m: usize, dx: f64, dt: f64, v: &[f64], out: &mut [f64]) {
    let dx2 = dx * dx;
    let at = |i: usize, j: usize| v[i * m + j];
    for i in 0..m {
        for j in 0..m {
            let k = i * m + j;
            let interior = i > 0 && j > 0 && i + 1 < m && j + 1 < m;
            let mut best = f64::NEG_INFINITY;
            for (b, bc) in c.branches.iter().enumerate() {
                let mut val = bc.discount * v[k];
                if interior {
                    let (a11, a12, a22) = (bc.a[0], bc.a[1], bc.a[3]);
                    let dxx = (at(i + 1, j) - 2.0 * v[k] + at(i - 1, j)) / dx2;
                    let dyy = (at(i, j + 1) - 2.0 * v[k] + at(i, j - 1)) / dx2;
                    let diag = if a12 >= 0.0 {
                        (at(i + 1, j + 1) - 2.0 * v[k] + at(i - 1, j - 1)) / dx2
                    } else {
                        (at(i + 1, j - 1) - 2.0 * v[k] + at(i - 1, j + 1)) / dx2
                    };
                    val += (a11 - a12.abs()) * dxx + (a22 - a12.abs()) * dyy + a12.abs() * diag;
                }
                for axis in 0..2 {
                    let mu = bc.drift[axis];
                    let (fwd, bwd) = match axis {
                        0 => ((i + 1 < m).then(|| at(i + 1, j)), (i > 0).then(|| at(i - 1, j))),
                        _ => ((j + 1 < m).then(|| at(i, j + 1)), (j > 0).then(|| at(i, j - 1))),
                    };
                    if mu > 0.0 {
                        if let Some(f) = fwd {
                            val += mu * (f - v[k]) / dx;
                        }
                    } else if mu < 0.0 {
                        if let Some(bk) = bwd {
                            val += mu * (v[k] - bk) / dx;
                        }
                    }
                }
                if c.drivers[b].is_some() {
                    let z = if interior {
                        [
                            (at(i + 1, j) - at(i - 1, j)) / (2.0 * dx),
                            (at(i, j + 1) - at(i, j - 1)) / (2.0 * dx),
                        ]
                    } else {
                        [0.0, 0.0]
                    };
                    let s = &bc.sigma;
                    let w = [s[0] * z[0] + s[2] * z[1], s[1] * z[0] + s[3] * z[1]];
                    val += c.driver(b, v[k], &w);
                }
                best = best.max(val);
            }
            out[k] = v[k] + dt * (best + c.shift);
        }
    }
}

/// Tridiagonal solve (Thomas); `lo[0]` and `up[m-1]` are ignored.
fn thomas(lo: &[f64], diag: &[f64], up: &[f64], rhs: &[f64], out: &mut [f64]) {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = up[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for j in 1..m {
        let den = diag[j] - lo[j] * c[j - 1];
        c[j] = if j + 1 < m { up[j] / den } else { 0.0 };
        d[j] = (rhs[j] - lo[j] * d[j - 1]) / den;
    }
    out[m - 1] = d[m - 1];
    for j in (0..m - 1).rev() {
        out[j] = d[j] - c[j] * out[j + 1];
    }
}

/// Coefficients of `(L_b v)_j = lo·v_{j-1} + dg·v_j + up·v_{j+1}`.
fn row(bc: &BranchCoeffs, j: usize, m: usize, dx: f64) -> (f64, f64, f64) {
    let (mut lo, mut dg, mut up) = (0.0, 0.0, 0.0);
    if j > 0 && j + 1 < m {
        let w = bc.a[0] / (dx * dx);
        lo += w;
        up += w;
        dg -= 2.0 * w;
    }
    let mu = bc.drift[0];
    if mu > 0.0 && j + 1 < m {
        up += mu / dx;
        dg -= mu / dx;
    } else if mu < 0.0 && j > 0 {
        lo -= mu / dx;
        dg += mu / dx;
    }
    (lo, dg + bc.discount, up)
}

fn implicit_step_1d(c: &StepCoeffs, dx: f64, dt: f64, vnext: &[f64], out: &mut [f64]) -> Result<usize> {
    let m = vnext.len();
    let nb = c.branches.len();
    if c.branches.iter().any(|bc| dt * bc.discount >= 1.0) {
        return Err(Error::Monotonicity("implicit step needs dt·r < 1".into()));
    }
    // driver terms are taken explicitly
    let h: Vec<Vec<f64>> = (0..nb)
        .map(|b| {
            (0..m)
                .map(|j| {
                    if c.drivers[b].is_none() {
                        return 0.0;
                    }
                    let z = if j > 0 && j + 1 < m { (vnext[j + 1] - vnext[j - 1]) / (2.0 * dx) } else { 0.0 };
                    c.driver(b, vnext[j], &[c.branches[b].sigma[0] * z])
                })
                .collect()
        })
        .collect();
    let value = |b: usize, j: usize, v: &[f64]| {
        let (lo, dg, up) = row(&c.branches[b], j, m, dx);
        let l = if j > 0 { lo * v[j - 1] } else { 0.0 } + dg * v[j] + if j + 1 < m { up * v[j + 1] } else { 0.0 };
        l + h[b][j]
    };
    let improve = |policy: &mut [usize], v: &[f64]| -> bool {
        let mut changed = false;
        for j in 0..m {
            let cur = value(policy[j], j, v);
            let mut best = (policy[j], cur);
            for b in 0..nb {
                let val = value(b, j, v);
                if val > best.1 + 1e-14 * (1.0 + cur.abs()) {
                    best = (b, val);
                }
            }
            if best.0 != policy[j] {
                policy[j] = best.0;
                changed = true;
            }
        }
        changed
    };
    let mut policy = vec![0usize; m];
    improve(&mut policy, vnext);
    let (mut lo, mut dg, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut v = vnext.to_vec();
    for sweep in 1..=POLICY_MAX_SWEEPS {
        for j in 0..m {
            let (l, d, u) = row(&c.branches[policy[j]], j, m, dx);
            lo[j] = -dt * l;
            dg[j] = 1.0 - dt * d;
            up[j] = -dt * u;
            rhs[j] = vnext[j] + dt * (h[policy[j]][j] + c.shift);
        }
        thomas(&lo, &dg, &up, &rhs, out);
        let diff = out.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v.copy_from_slice(out);
        let changed = improve(&mut policy, &v);
        if !changed || (sweep > 1 && diff < POLICY_TOL) {
            return Ok(sweep);
        }
    }
    Err(Error::PolicyIteration(POLICY_MAX_SWEEPS))
}

/// Backward march of `values` (given at `t_end`) down to `t_start` on `mesh`, with
/// coefficients read from `features(t)`.
pub(crate) fn march(
    spec: &GeneratorSpec,
    features: &dyn Fn(f64) -> Vec<f64>,
    mesh: &SlabMesh,
    mut v: Vec<f64>,
    t_end: f64,
    t_start: f64,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    let len = t_end - t_start;
    if len <= 1e-14 * t_end.abs().max(1.0) {
        return Ok(v);
    }
    if scheme == Scheme::ImplicitPolicy && mesh.dim != 1 {
        return Err(Error::Unsupported("the policy-iteration scheme is one-dimensional".into()));
    }
    let steps = ((len / mesh.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = len / steps as f64;
    let mut out = vec![0.0; v.len()];
    for k in 0..steps {
        let t = t_end - k as f64 * dt;
        let c = StepCoeffs::new(spec, t, features(t))?;
        match scheme {
            Scheme::Explicit => {
                let rate = explicit_rate(&c, mesh.dim, mesh.dx)?;
                if dt * rate > 1.0 + 1e-12 {
                    return Err(Error::Cfl { dt, limit: 1.0 / rate });
                }
                if mesh.dim == 1 {
                    explicit_step_1d(&c, mesh.dx, dt, &v, &mut out);
                } else {
                    explicit_step_2d(&c, mesh.side(), mesh.dx, dt, &v, &mut out);
                }
            }
            Scheme::ImplicitPolicy => {
                implicit_step_1d(&c, mesh.dx, dt, &v, &mut out)?;
            }
        }
        std::mem::swap(&mut v, &mut out);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Backend("non-finite value during the backward march".into()));
    }
    Ok(v)
}

/// Largest explicit time step over the slab (checked at both ends and the middle).
pub fn explicit_dt_limit(frozen: &FrozenGenerator, slab: (f64, f64), dim: usize, dx: f64) -> Result<f64> {
    let mut rate: f64 = 0.0;
    for t in [slab.0, 0.5 * (slab.0 + slab.1), slab.1] {
        let c = StepCoeffs::new(frozen.spec, t, frozen.features(t))?;
        rate = rate.max(explicit_rate(&c, dim, dx)?);
    }
    Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
}

/// Solves `-∂_t v - F^n_i(t, v, Dv, D²v) = 0` on `slab` backward from `terminal`
/// (given at `slab.1`) and returns the field at `slab.0`.
pub fn solve_slab(frozen: &FrozenGenerator, terminal: &ValueField, slab: (f64, f64), scheme: Scheme) -> Result<ValueField> {
    if (terminal.time - slab.1).abs() > 1e-12 * slab.1.abs().max(1.0) {
        return Err(Error::Config {
            field: "terminal.time".into(),
            msg: format!("terminal field at {} but slab ends at {}", terminal.time, slab.1),
        });
    }
    if !(slab.1 >= slab.0) {
        return Err(Error::Grid(format!("empty slab [{}, {}]", slab.0, slab.1)));
    }
    if frozen.spec.dim != terminal.mesh.dim {
        return Err(Error::Dim(format!(
            "generator in dimension {} on a {}-dimensional mesh",
            frozen.spec.dim, terminal.mesh.dim
        )));
    }
    let values = march(
        frozen.spec,
        &|t| frozen.features(t),
        &terminal.mesh,
        terminal.values.clone(),
        slab.1,
        slab.0,
        scheme,
    )?;
    Ok(ValueField {
        mesh: terminal.mesh.clone(),
        time: slab.0,
        values,
    })
}

/// Time step for a march over `slab`: the configured one, or a fraction of the
/// explicit limit, or `dx` for the implicit scheme.
pub(crate) fn pick_dt(
    cfg: &super::FdConfig,
    spec: &GeneratorSpec,
    features: &dyn Fn(f64) -> Vec<f64>,
    slab: (f64, f64),
    dim: usize,
) -> Result<f64> {
    if let Some(dt) = cfg.dt {
        return Ok(dt);
    }
    if cfg.scheme == Scheme::ImplicitPolicy {
        return Ok(cfg.dx);
    }
    let mut rate: f64 = 0.0;
    for t in [slab.0, 0.5 * (slab.0 + slab.1), slab.1] {
        let c = StepCoeffs::new(spec, t, features(t))?;
        rate = rate.max(explicit_rate(&c, dim, cfg.dx)?);
    }
    let len = (slab.1 - slab.0).max(1e-300);
    Ok(if rate > 0.0 { (cfg.cfl_fraction / rate).min(len) } else { len })
}
