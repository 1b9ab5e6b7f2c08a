use super::grid::{TimeGrid, TIME_RTOL};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathMode {
    /// Continuous, piecewise linear between nodes, constant after the last node.
    ContinuousPL,
    /// Right-continuous with left limits.
    CadlagPC,
}

/// A piecewise-linear càdlàg path on `[0, T]`.
///
/// Segment `k` covers `[times[k], times[k+1])` (the last one ends at `T`) and moves
/// linearly from `starts[k]` to the left limit `ends[k]`. Piecewise-constant paths
/// have `starts == ends`; continuous paths have `ends[k] == starts[k+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    dim: usize,
    mode: PathMode,
    horizon: f64,
    times: Vec<f64>,
    starts: Vec<f64>,
    ends: Vec<f64>,
}

fn check_times(horizon: f64, times: &[f64]) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Path(format!("horizon must be positive, got {horizon}")));
    }
    if times.first() != Some(&0.0) {
        return Err(Error::Path("first breakpoint must be 0".into()));
    }
    let tol = TIME_RTOL * horizon;
    if *times.last().unwrap() > horizon + tol {
        return Err(Error::Path("breakpoint beyond the horizon".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Path("breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

fn flatten(dim: usize, values: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(values.len() * dim);
    for v in values {
        if v.len() != dim {
            return Err(Error::Dim(format!("expected {dim} coordinates, got {}", v.len())));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Path("non-finite value".into()));
        }
        flat.extend_from_slice(v);
    }
    Ok(flat)
}

impl Path {
    /// Value `values[k]` on `[times[k], times[k+1])`.
    pub fn piecewise_constant(horizon: f64, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let dim = values.first().map_or(0, |v| v.len());
        if dim == 0 || values.len() != times.len() {
            return Err(Error::Path("need one non-empty value per breakpoint".into()));
        }
        check_times(horizon, &times)?;
        let starts = flatten(dim, &values)?;
        Ok(Path {
            dim,
            mode: PathMode::CadlagPC,
            horizon,
            times,
            ends: starts.clone(),
            starts,
        })
    }

    /// Linear interpolation of the nodes, constant after the last node.
    pub fn piecewise_linear(horizon: f64, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let dim = values.first().map_or(0, |v| v.len());
        if dim == 0 || values.len() != times.len() {
            return Err(Error::Path("need one non-empty value per node".into()));
        }
        check_times(horizon, &times)?;
        let starts = flatten(dim, &values)?;
        let mut ends = starts[dim..].to_vec();
        ends.extend_from_slice(&starts[starts.len() - dim..]);
        Ok(Path {
            dim,
            mode: PathMode::ContinuousPL,
            horizon,
            times,
            starts,
            ends,
        })
    }

    pub fn scalar_pc(horizon: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::piecewise_constant(horizon, times, values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn scalar_pl(horizon: f64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::piecewise_linear(horizon, times, values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn constant(horizon: f64, value: &[f64], mode: PathMode) -> Result<Self> {
        match mode {
            PathMode::CadlagPC => Self::piecewise_constant(horizon, vec![0.0], vec![value.to_vec()]),
            PathMode::ContinuousPL => Self::piecewise_linear(horizon, vec![0.0], vec![value.to_vec()]),
        }
    }

    /// Path rebuilt from grid values `t_0..t_i` (the frozen key): PC steps or PL
    /// interpolation, constant after `t_i`.
    pub fn from_grid_values(grid: &TimeGrid, values: &[f64], dim: usize, mode: PathMode) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::Key("key length is not a multiple of the dimension".into()));
        }
        let count = values.len() / dim;
        if count > grid.points().len() {
            return Err(Error::Key(format!(
                "{count} key entries for a grid with {} points",
                grid.points().len()
            )));
        }
        let times = grid.points()[..count].to_vec();
        let rows = values.chunks(dim).map(|c| c.to_vec()).collect();
        match mode {
            PathMode::CadlagPC => Self::piecewise_constant(grid.horizon(), times, rows),
            PathMode::ContinuousPL => Self::piecewise_linear(grid.horizon(), times, rows),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> PathMode {
        self.mode
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.times
    }

    pub fn segment_count(&self) -> usize {
        self.times.len()
    }

    pub fn segment_start(&self, k: usize) -> &[f64] {
        &self.starts[k * self.dim..(k + 1) * self.dim]
    }

    pub fn segment_end(&self, k: usize) -> &[f64] {
        &self.ends[k * self.dim..(k + 1) * self.dim]
    }

    fn segment_right(&self, k: usize) -> f64 {
        self.times.get(k + 1).copied().unwrap_or(self.horizon)
    }

    pub fn tol(&self) -> f64 {
        TIME_RTOL * self.horizon
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.starts == self.ends
    }

    /// Segment holding `s` under the right-continuous convention.
    fn segment_at(&self, s: f64) -> usize {
        let tol = self.tol();
        self.times.partition_point(|&b| b <= s + tol).max(1) - 1
    }

    fn interp_into(&self, k: usize, s: f64, out: &mut [f64]) {
        let a = self.times[k];
        let b = self.segment_right(k);
        let w = if b > a { ((s - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        let (st, en) = (self.segment_start(k), self.segment_end(k));
        for c in 0..self.dim {
            out[c] = st[c] + w * (en[c] - st[c]);
        }
    }

    /// `x_s` (right limit at breakpoints).
    pub fn value_into(&self, s: f64, out: &mut [f64]) {
        let k = self.segment_at(s);
        let tol = self.tol();
        if (self.times[k] - s).abs() <= tol {
            out.copy_from_slice(self.segment_start(k));
        } else if s >= self.horizon - tol && k + 1 == self.times.len() {
            out.copy_from_slice(self.segment_end(k));
        } else {
            self.interp_into(k, s, out);
        }
    }

    pub fn value(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.value_into(s, &mut out);
        out
    }

    /// First coordinate of `x_s`.
    pub fn value1(&self, s: f64) -> f64 {
        if self.dim == 1 {
            let mut out = [0.0];
            self.value_into(s, &mut out);
            out[0]
        } else {
            self.value(s)[0]
        }
    }

    /// `x_{s-}`; equals `x_0` at `s = 0`.
    pub fn left_limit_into(&self, s: f64, out: &mut [f64]) {
        let tol = self.tol();
        if s <= tol {
            out.copy_from_slice(self.segment_start(0));
            return;
        }
        let k = self.times.partition_point(|&b| b < s - tol).max(1) - 1;
        if (self.segment_right(k) - s).abs() <= tol {
            out.copy_from_slice(self.segment_end(k));
        } else {
            self.interp_into(k, s, out);
        }
    }

    pub fn left_limit(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.left_limit_into(s, &mut out);
        out
    }

    /// `‖x‖ = sup_s |x_s|`.
    pub fn sup_norm(&self) -> f64 {
        self.starts
            .chunks(self.dim)
            .chain(self.ends.chunks(self.dim))
            .map(norm)
            .fold(0.0, f64::max)
    }

    /// The stopped path `x_{t∧}`.
    pub fn stopped(&self, t: f64) -> Path {
        let tol = self.tol();
        if t >= self.horizon - tol {
            return self.clone();
        }
        let xt = self.value(t);
        self.splice(t, &xt, None)
    }

    /// Keeps `[0, t)` of `self`, then a segment starting at `t` with value `head`,
    /// followed by the remaining segments of `tail` (if any).
    fn splice(&self, t: f64, head: &[f64], tail: Option<&Path>) -> Path {
        let d = self.dim;
        let tol = self.tol();
        let mut times = Vec::new();
        let mut starts = Vec::new();
        let mut ends = Vec::new();
        for k in 0..self.times.len() {
            if self.times[k] >= t - tol {
                break;
            }
            times.push(self.times[k]);
            starts.extend_from_slice(self.segment_start(k));
            if self.segment_right(k) > t + tol {
                let mut lim = vec![0.0; d];
                self.interp_into(k, t, &mut lim);
                ends.extend_from_slice(&lim);
            } else {
                ends.extend_from_slice(self.segment_end(k));
            }
        }
        times.push(t.max(0.0));
        starts.extend_from_slice(head);
        match tail {
            None => ends.extend_from_slice(head),
            Some(p) => {
                let k0 = p.segment_at(t);
                if p.segment_right(k0) > t + tol {
                    ends.extend_from_slice(p.segment_end(k0));
                } else {
                    ends.extend_from_slice(head);
                }
                for k in k0 + 1..p.times.len() {
                    times.push(p.times[k]);
                    starts.extend_from_slice(p.segment_start(k));
                    ends.extend_from_slice(p.segment_end(k));
                }
            }
        }
        Path {
            dim: d,
            mode: self.mode,
            horizon: self.horizon,
            times,
            starts,
            ends,
        }
    }

    /// Adds `shift` to every value on `[t, T]` (the vertical bump `x + δ 1_{[t,T]}`).
    pub fn bumped(&self, t: f64, shift: &[f64]) -> Path {
        let mut tail = self.clone();
        for v in tail.starts.chunks_mut(self.dim).chain(tail.ends.chunks_mut(self.dim)) {
            for (c, s) in v.iter_mut().zip(shift) {
                *c += s;
            }
        }
        concat(self, t, &tail)
    }

    pub fn with_mode(mut self, mode: PathMode) -> Path {
        self.mode = mode;
        self
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `x ⊞_t x' = x 1_{[0,t)} + x' 1_{[t,T]}`.
pub fn concat(x: &Path, t: f64, xp: &Path) -> Path {
    let tol = x.tol();
    if t <= tol {
        return xp.clone();
    }
    let head = xp.value(t);
    let mut out = x.splice(t, &head, Some(xp));
    let continuous = x.mode == PathMode::ContinuousPL
        && xp.mode == PathMode::ContinuousPL
        && norm(
            &x.left_limit(t)
                .iter()
                .zip(&head)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        ) <= 1e-12 * (1.0 + norm(&head));
    out.mode = if continuous {
        PathMode::ContinuousPL
    } else {
        PathMode::CadlagPC
    };
    out
}

/// `Π_t[x]`: PL interpolation (continuous mode) or PC freezing (càdlàg mode) of
/// `x` on the grid points before `t`, followed by `x_t` on `[t, T]`.
pub fn project(grid: &TimeGrid, x: &Path, t: f64) -> Result<Path> {
    if (grid.horizon() - x.horizon()).abs() > grid.tol() {
        return Err(Error::Path("grid and path horizons differ".into()));
    }
    let tol = grid.tol();
    if !(t > tol) {
        return Err(Error::Domain {
            t,
            horizon: grid.horizon(),
        });
    }
    let k = grid.upper_index(t)? - 1;
    let mut times: Vec<f64> = grid.points()[..=k].to_vec();
    let mut rows: Vec<Vec<f64>> = times.iter().map(|&s| x.value(s)).collect();
    times.push(t);
    rows.push(x.value(t));
    match x.mode() {
        PathMode::CadlagPC => Path::piecewise_constant(x.horizon(), times, rows),
        PathMode::ContinuousPL => Path::piecewise_linear(x.horizon(), times, rows),
    }
}

/// `Π[x] = Π_T[x]`.
pub fn project_full(grid: &TimeGrid, x: &Path) -> Result<Path> {
    project(grid, x, grid.horizon())
}

/// Values of `x` at `t_0..t_i`, flattened (the frozen key `[x]_i`).
pub fn grid_values(grid: &TimeGrid, x: &Path, i: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((i + 1) * x.dim());
    for &s in &grid.points()[..=i] {
        out.extend(x.value(s));
    }
    out
}
