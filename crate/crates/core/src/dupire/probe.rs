use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::generators::{terminal_on_key, FrozenKey, TerminalSpec};
use crate::slab_pde::lift_weights;
use crate::timegrid_paths::{PathMode, TimeGrid};

/// Relative residual below which a transfer coefficient is accepted.
pub const PROBE_TOL: f64 = 1e-6;
const SEARCH_RANGE: f64 = 10.0;
const SEARCH_POINTS: usize = 2001;

#[derive(Clone, Debug, PartialEq)]
pub enum PairStatus {
    /// Summary form: `p = λ([t_i, t_{i+1})) / λ([t_j, T])`.
    Analytic,
    /// Found by search with a residual below tolerance.
    Fitted,
    /// No admissible non-zero `p` (the reason is given).
    Degenerate(String),
    /// Best `p` leaves a residual above tolerance.
    Fails,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairProbe {
    pub i: usize,
    pub j: usize,
    pub p: Option<f64>,
    /// RMS of `g(x + δe_i) − g(x + pδ1_{ℓ≥j})` over the samples, relative to the
    /// RMS effect of the bump.
    pub residual: f64,
    pub status: PairStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub pairs: Vec<PairProbe>,
}

impl ProbeReport {
    pub fn holds(&self) -> bool {
        !self.pairs.is_empty()
            && self
                .pairs
                .iter()
                .all(|p| matches!(p.status, PairStatus::Analytic | PairStatus::Fitted))
    }
}

struct Samples {
    keys: Vec<Vec<f64>>,
    deltas: Vec<f64>,
}

fn g_on(g: &TerminalSpec, grid: &TimeGrid, key: &[f64]) -> Result<f64> {
    let k = FrozenKey::new(grid, grid.n(), 1, key.to_vec())?;
    terminal_on_key(g, grid, &k, PathMode::CadlagPC)
}

/// `(lhs − base, lhs − rhs(p))` evaluations for one pair.
fn residual(g: &TerminalSpec, grid: &TimeGrid, s: &Samples, i: usize, j: usize, p: f64) -> Result<(f64, f64)> {
    let (mut effect, mut res) = (0.0, 0.0);
    for (key, &d) in s.keys.iter().zip(&s.deltas) {
        let base = g_on(g, grid, key)?;
        let mut a = key.clone();
        a[i] += d;
        let lhs = g_on(g, grid, &a)?;
        let mut b = key.clone();
        for v in b.iter_mut().skip(j) {
            *v += p * d;
        }
        let rhs = g_on(g, grid, &b)?;
        effect += (lhs - base).powi(2);
        res += (lhs - rhs).powi(2);
    }
    let m = s.keys.len() as f64;
    Ok(((effect / m).sqrt(), (res / m).sqrt()))
}

fn reads_summary_only(g: &TerminalSpec, s: &Samples) -> bool {
    let Some(sum) = &g.summary else { return false };
    s.keys.iter().zip(&s.deltas).all(|(k, &d)| {
        let u = k[0];
        ((sum.g0)(u, k[1]) - (sum.g0)(u, k[1] + d)).abs() < 1e-14
    })
}

/// Transfer coefficients `p^{i,j}` (`1 ≤ i < j < n`) of a scalar terminal:
/// analytic for summary form, searched otherwise.
pub fn structure_condition_probe(g: &TerminalSpec, grid: &TimeGrid, samples: usize, seed: u64) -> Result<ProbeReport> {
    let n = grid.n();
    if g.dim != 1 {
        return Ok(ProbeReport {
            pairs: vec![PairProbe {
                i: 0,
                j: 0,
                p: None,
                residual: f64::NAN,
                status: PairStatus::Degenerate("the probe handles scalar paths".into()),
            }],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Samples {
        keys: (0..samples.max(2))
            .map(|_| (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect(),
        deltas: (0..samples.max(2))
            .map(|_| {
                let d: f64 = rng.gen_range(0.1..1.0);
                if rng.gen_bool(0.5) {
                    d
                } else {
                    -d
                }
            })
            .collect(),
    };
    let analytic = reads_summary_only(g, &s);
    let w = g
        .summary
        .as_ref()
        .map(|sum| lift_weights(&sum.measure, grid, PathMode::CadlagPC));
    let mut pairs = Vec::new();
    for i in 1..n {
        for j in i + 1..n {
            let (effect, _) = residual(g, grid, &s, i, j, 0.0)?;
            if effect < 1e-12 {
                pairs.push(PairProbe {
                    i,
                    j,
                    p: None,
                    residual: 0.0,
                    status: PairStatus::Degenerate(format!("bumping slot {i} has no effect")),
                });
                continue;
            }
            if let (true, Some(w)) = (analytic, &w) {
                let tail: f64 = w[j..].iter().sum();
                if tail > 0.0 {
                    let p = w[i] / tail;
                    let (_, r) = residual(g, grid, &s, i, j, p)?;
                    pairs.push(PairProbe {
                        i,
                        j,
                        p: Some(p),
                        residual: r / effect,
                        status: PairStatus::Analytic,
                    });
                    continue;
                }
            }
            let probe = |p: f64| residual(g, grid, &s, i, j, p).map(|(_, r)| r);
            let step = 2.0 * SEARCH_RANGE / (SEARCH_POINTS - 1) as f64;
            let mut best = (0.0, f64::INFINITY);
            for k in 0..SEARCH_POINTS {
                let p = -SEARCH_RANGE + k as f64 * step;
                let r = probe(p)?;
                if r < best.1 {
                    best = (p, r);
                }
            }
            // golden section on the bracketing cell
            let (mut a, mut b) = (best.0 - step, best.0 + step);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if probe(c)? < probe(d)? {
                    b = d;
                } else {
                    a = c;
                }
            }
            let p = 0.5 * (a + b);
            let r = probe(p)? / effect;
            let status = if p.abs() < 1e-6 {
                PairStatus::Degenerate("best transfer coefficient vanishes".into())
            } else if r <= PROBE_TOL {
                PairStatus::Fitted
            } else {
                PairStatus::Fails
            };
            pairs.push(PairProbe {
                i,
                j,
                p: Some(p),
                residual: r,
                status,
            });
        }
    }
    Ok(ProbeReport { pairs })
}
