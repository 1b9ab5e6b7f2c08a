use crate::error::{Error, Result};

/// Relative tolerance used for every time comparison.
pub const TIME_RTOL: f64 = 1e-12;

/// One time grid `0 = t_0 < ... < t_n = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Grid("need at least the two points 0 and T".into()));
        }
        let horizon = *points.last().unwrap();
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Grid(format!("horizon must be positive, got {horizon}")));
        }
        if points[0] != 0.0 {
            return Err(Error::Grid(format!("first point must be 0, got {}", points[0])));
        }
        let tol = TIME_RTOL * horizon;
        for w in points.windows(2) {
            if !(w[1] - w[0] > tol) {
                return Err(Error::Grid(format!(
                    "points must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { points })
    }

    /// `n` equal intervals on `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Grid("a grid needs at least one interval".into()));
        }
        let mut points: Vec<f64> = (0..n).map(|i| horizon * i as f64 / n as f64).collect();
        points.push(horizon);
        TimeGrid::new(points)
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of slabs (intervals).
    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// `|π| = max_i (t_{i+1} - t_i)`.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn tol(&self) -> f64 {
        TIME_RTOL * self.horizon()
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let tol = self.tol();
        if !(t >= -tol && t <= self.horizon() + tol) {
            return Err(Error::Domain {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    /// Index of the grid point equal to `t` (within tolerance).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = self.tol();
        let i = self.points.partition_point(|&p| p < t - tol);
        (i < self.points.len() && (self.points[i] - t).abs() <= tol).then_some(i)
    }

    pub fn contains_time(&self, t: f64) -> bool {
        self.index_of(t).is_some()
    }

    /// `i` with `t ∈ [t_i, t_{i+1})`; returns `n` at `t = T`.
    pub fn slab_index(&self, t: f64) -> Result<usize> {
        self.check_domain(t)?;
        let tol = self.tol();
        let i = self.points.partition_point(|&p| p <= t + tol);
        Ok(i.saturating_sub(1).min(self.n()))
    }

    /// `i` with `t ∈ (t_{i-1}, t_i]`; 0 at `t = 0`.
    pub fn upper_index(&self, t: f64) -> Result<usize> {
        self.check_domain(t)?;
        let tol = self.tol();
        Ok(self.points.partition_point(|&p| p < t - tol).min(self.n()))
    }

    /// `η(t)`: the grid point at or before `t`.
    pub fn eta(&self, t: f64) -> Result<f64> {
        Ok(self.points[self.slab_index(t)?])
    }

    /// `η⁺(t)`: the grid point at or after `t`, with `η⁺(0) = 0`.
    pub fn eta_plus(&self, t: f64) -> Result<f64> {
        Ok(self.points[self.upper_index(t)?])
    }

    /// Point-set inclusion `self ⊂ other`.
    pub fn is_subset_of(&self, other: &TimeGrid) -> bool {
        (self.horizon() - other.horizon()).abs() <= self.tol()
            && self.points.iter().all(|&p| other.contains_time(p))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Rule {
    /// Level `n` has `base^n` equal intervals.
    Power { base: usize },
    Explicit(Vec<TimeGrid>),
}

/// Nested refining sequence of grids, indexed by level `n ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSequence {
    horizon: f64,
    rule: Rule,
}

const MAX_INTERVALS: usize = 1 << 22;

impl GridSequence {
    pub fn dyadic(horizon: f64) -> Result<Self> {
        Self::power(horizon, 2)
    }

    pub fn triadic(horizon: f64) -> Result<Self> {
        Self::power(horizon, 3)
    }

    pub fn power(horizon: f64, base: usize) -> Result<Self> {
        if base < 2 {
            return Err(Error::Grid(format!("refinement base must be ≥ 2, got {base}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Grid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(GridSequence {
            horizon,
            rule: Rule::Power { base },
        })
    }

    /// User-supplied sequence; entry `k` is level `k + 1`. Must be nested.
    pub fn from_grids(grids: Vec<TimeGrid>) -> Result<Self> {
        let first = grids
            .first()
            .ok_or_else(|| Error::Grid("empty grid sequence".into()))?;
        let horizon = first.horizon();
        for (k, w) in grids.windows(2).enumerate() {
            if !w[0].is_subset_of(&w[1]) {
                return Err(Error::Grid(format!(
                    "level {} is not contained in level {}",
                    k + 1,
                    k + 2
                )));
            }
        }
        Ok(GridSequence {
            horizon,
            rule: Rule::Explicit(grids),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn name(&self) -> String {
        match &self.rule {
            Rule::Power { base: 2 } => "dyadic".into(),
            Rule::Power { base: 3 } => "triadic".into(),
            Rule::Power { base } => format!("power{base}"),
            Rule::Explicit(g) => format!("explicit{}", g.len()),
        }
    }

    pub fn level(&self, n: usize) -> Result<TimeGrid> {
        match &self.rule {
            Rule::Power { base } => {
                let mut intervals = 1usize;
                for _ in 0..n {
                    intervals = intervals
                        .checked_mul(*base)
                        .filter(|&m| m <= MAX_INTERVALS)
                        .ok_or_else(|| Error::Grid(format!("level {n} is too fine")))?;
                }
                TimeGrid::uniform(self.horizon, intervals)
            }
            Rule::Explicit(grids) => n
                .checked_sub(1)
                .and_then(|k| grids.get(k))
                .cloned()
                .ok_or_else(|| Error::Grid(format!("level {n} not in the supplied sequence"))),
        }
    }

    pub fn max_level(&self) -> Option<usize> {
        match &self.rule {
            Rule::Power { .. } => None,
            Rule::Explicit(g) => Some(g.len()),
        }
    }
}
