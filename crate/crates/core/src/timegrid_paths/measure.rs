use super::grid::{GridSequence, TimeGrid, TIME_RTOL};
use super::path::{norm, Path};
use crate::error::{Error, Result};

/// Piecewise-linear density on `[times[0], times[last]]`, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Density {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::Measure("density needs ≥ 2 samples, one value each".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Measure("density times must increase".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Measure("density values must be finite and ≥ 0".into()));
        }
        Ok(Density { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn interp(&self, s: f64) -> f64 {
        let k = self.times.partition_point(|&b| b <= s).clamp(1, self.times.len() - 1);
        let (a, b) = (self.times[k - 1], self.times[k]);
        let w = ((s - a) / (b - a)).clamp(0.0, 1.0);
        self.values[k - 1] + w * (self.values[k] - self.values[k - 1])
    }

    fn right_limit(&self, s: f64) -> f64 {
        if s >= self.times[0] && s < *self.times.last().unwrap() {
            self.interp(s)
        } else {
            0.0
        }
    }

    fn left_limit(&self, s: f64) -> f64 {
        if s > self.times[0] && s <= *self.times.last().unwrap() {
            self.interp(s)
        } else {
            0.0
        }
    }

    fn inside(&self, s: f64) -> f64 {
        if s > self.times[0] && s < *self.times.last().unwrap() {
            self.interp(s)
        } else {
            0.0
        }
    }
}

/// Finite nonnegative measure on `[0, T]`: atoms plus an optional density.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    density: Option<Density>,
}

/// Which endpoints of `[a, b]` count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ends {
    Closed,
    /// `[a, b)`
    RightOpen,
    /// `(a, b]`
    LeftOpen,
    Open,
}

impl AtomicMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>, density: Option<Density>) -> Result<Self> {
        if atoms
            .iter()
            .any(|&(t, w)| !(t.is_finite() && t >= 0.0 && w.is_finite() && w >= 0.0))
        {
            return Err(Error::Measure("atoms need finite times ≥ 0 and weights ≥ 0".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(AtomicMeasure { atoms, density })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(t: f64, weight: f64) -> Result<Self> {
        Self::new(vec![(t, weight)], None)
    }

    /// Lebesgue measure restricted to `[a, b]`.
    pub fn lebesgue(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![], Some(Density::new(vec![a, b], vec![1.0, 1.0])?))
    }

    pub fn with_atom(mut self, t: f64, weight: f64) -> Result<Self> {
        self.atoms.push((t, weight));
        Self::new(self.atoms, self.density)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let atoms = self.atoms.iter().map(|&(t, w)| (t, w * c)).collect();
        let density = match &self.density {
            None => None,
            Some(d) => Some(Density::new(
                d.times.clone(),
                d.values.iter().map(|v| v * c).collect(),
            )?),
        };
        Self::new(atoms, density)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.1 == 0.0)
            && self
                .density
                .as_ref()
                .map_or(true, |d| d.values.iter().all(|v| *v == 0.0))
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.density.is_none()
    }

    fn density_mass(&self, a: f64, b: f64) -> f64 {
        let Some(d) = &self.density else { return 0.0 };
        let lo = a.max(d.times[0]);
        let hi = b.min(*d.times.last().unwrap());
        if !(hi > lo) {
            return 0.0;
        }
        let mut pts = vec![lo];
        pts.extend(d.times.iter().copied().filter(|&s| s > lo && s < hi));
        pts.push(hi);
        pts.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (d.right_limit(w[0]) + d.left_limit(w[1])))
            .sum()
    }

    /// `λ` of the interval `a..b` with the given endpoint convention.
    pub fn mass(&self, a: f64, b: f64, ends: Ends) -> f64 {
        let tol = TIME_RTOL * b.abs().max(1.0);
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|&&(t, _)| {
                let left = match ends {
                    Ends::Closed | Ends::RightOpen => t >= a - tol,
                    _ => t > a + tol,
                };
                let right = match ends {
                    Ends::Closed | Ends::LeftOpen => t <= b + tol,
                    _ => t < b - tol,
                };
                left && right
            })
            .map(|a| a.1)
            .sum();
        atoms + self.density_mass(a, b)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass(f64::NEG_INFINITY, f64::INFINITY, Ends::Closed)
    }

    pub fn atom_at(&self, t: f64) -> f64 {
        self.mass(t, t, Ends::Closed)
    }

    /// `∫_{[0,u]} x dλ`, exact for piecewise-linear paths and densities.
    pub fn integrate_upto(&self, x: &Path, u: f64) -> Vec<f64> {
        let d = x.dim();
        let mut out = vec![0.0; d];
        let mut buf = vec![0.0; d];
        self.integrate_into(x, u, &mut out, &mut buf);
        out
    }

    pub fn integrate_into(&self, x: &Path, u: f64, out: &mut [f64], buf: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let tol = TIME_RTOL * x.horizon();
        for &(t, w) in &self.atoms {
            if t <= u + tol && w != 0.0 {
                x.value_into(t, buf);
                for (o, b) in out.iter_mut().zip(buf.iter()) {
                    *o += w * b;
                }
            }
        }
        let Some(dens) = &self.density else { return };
        let lo = dens.times[0].max(0.0);
        let hi = dens.times.last().unwrap().min(u);
        if !(hi > lo) {
            return;
        }
        let cuts = merged_cuts(lo, hi, x.breakpoints(), &dens.times);
        let dim = out.len();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = 0.5 * (a + b);
            let (ra, rm, rb) = (dens.right_limit(a), dens.inside(m), dens.left_limit(b));
            let h = (b - a) / 6.0;
            x.value_into(a, buf);
            for c in 0..dim {
                out[c] += h * ra * buf[c];
            }
            x.value_into(m, buf);
            for c in 0..dim {
                out[c] += 4.0 * h * rm * buf[c];
            }
            x.left_limit_into(b, buf);
            for c in 0..dim {
                out[c] += h * rb * buf[c];
            }
        }
    }

    /// `∫_{[0,u]} |x_s - x'_s| λ(ds)`.
    pub fn integrate_abs_diff(&self, x: &Path, xp: &Path, u: f64) -> f64 {
        let d = x.dim();
        let (mut a_buf, mut b_buf) = (vec![0.0; d], vec![0.0; d]);
        let mut diff = |s: f64, left: bool| -> f64 {
            if left {
                x.left_limit_into(s, &mut a_buf);
                xp.left_limit_into(s, &mut b_buf);
            } else {
                x.value_into(s, &mut a_buf);
                xp.value_into(s, &mut b_buf);
            }
            let v: Vec<f64> = a_buf.iter().zip(&b_buf).map(|(p, q)| p - q).collect();
            norm(&v)
        };
        let tol = TIME_RTOL * x.horizon();
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|a| a.0 <= u + tol)
            .map(|&(t, w)| w * diff(t, false))
            .sum();
        if let Some(dens) = &self.density {
            let lo = dens.times[0].max(0.0);
            let hi = dens.times.last().unwrap().min(u);
            if hi > lo {
                let mut bps = x.breakpoints().to_vec();
                bps.extend_from_slice(xp.breakpoints());
                let cuts = merged_cuts(lo, hi, &bps, &dens.times);
                // |x - x'| need not be linear on a piece, so split each piece.
                const PANELS: usize = 8;
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let h = (b - a) / PANELS as f64;
                    for p in 0..PANELS {
                        let (l, r) = (a + p as f64 * h, a + (p + 1) as f64 * h);
                        let m = 0.5 * (l + r);
                        let fl = if p == 0 { dens.right_limit(l) * diff(l, false) } else { dens.inside(l) * diff(l, false) };
                        let fr = if p + 1 == PANELS { dens.left_limit(r) * diff(r, true) } else { dens.inside(r) * diff(r, false) };
                        total += h / 6.0 * (fl + 4.0 * dens.inside(m) * diff(m, false) + fr);
                    }
                }
            }
        }
        total
    }

    /// Atom times that are not points of any level `1..=max_level` of `seq`.
    pub fn atoms_off_sequence(&self, seq: &GridSequence, max_level: usize) -> Result<Vec<f64>> {
        let mut grids = Vec::new();
        for n in 1..=max_level {
            grids.push(seq.level(n)?);
        }
        Ok(self
            .atoms
            .iter()
            .filter(|a| a.1 > 0.0 && !grids.iter().any(|g| g.contains_time(a.0)))
            .map(|a| a.0)
            .collect())
    }

    /// Errors unless every atom lies on some level `1..=max_level` of `seq`.
    pub fn check_atoms_on(&self, seq: &GridSequence, max_level: usize) -> Result<()> {
        let off = self.atoms_off_sequence(seq, max_level)?;
        if off.is_empty() {
            Ok(())
        } else {
            Err(Error::Measure(format!(
                "atoms at {off:?} are not on any of the first {max_level} levels of the {} sequence",
                seq.name()
            )))
        }
    }

    pub fn atoms_on_grid(&self, grid: &TimeGrid) -> bool {
        self.atoms.iter().all(|a| a.1 == 0.0 || grid.contains_time(a.0))
    }
}

fn merged_cuts(lo: f64, hi: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .copied()
        .filter(|&s| s > lo && s < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    let tol = TIME_RTOL * hi.abs().max(1.0);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= tol);
    cuts
}
