use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::generators::terminal::SummaryFn;
use crate::generators::{Summary, TerminalSpec};
use crate::slab_pde::lift_weights;
use crate::timegrid_paths::{PathMode, TimeGrid};

pub const DEFAULT_BANDWIDTH: f64 = 1e-3;

/// Quadrature nodes per axis of the mollifier.
const KERNEL_NODES: usize = 8;
const FIRST_DIFF_STEP: f64 = 1e-4;
const SECOND_DIFF_STEP: f64 = 1e-2;

/// Bound check on one slot (`order = 1`) or slot pair (`order = 2`).
#[derive(Clone, Debug, PartialEq)]
pub struct SlotCertificate {
    pub order: usize,
    pub i: usize,
    pub j: usize,
    /// Largest sampled `|∂_i g^n|` or `|∂_i ∂_j g^n|`.
    pub sampled: f64,
    pub bound: f64,
    pub pass: bool,
}

pub struct SmoothedTerminal {
    pub terminal: TerminalSpec,
    pub grid: TimeGrid,
    pub mode: PathMode,
    /// Summary weights on the key slots.
    pub weights: Vec<f64>,
    pub bandwidth: f64,
    pub certificates: Vec<SlotCertificate>,
}

impl SmoothedTerminal {
    /// `g^n(x_0, …, x_n)`.
    pub fn on_key(&self, key: &[f64]) -> f64 {
        let s = self.terminal.summary.as_ref().unwrap();
        let stat: f64 = self.weights.iter().zip(key).map(|(w, v)| w * v).sum();
        (s.g0)(stat, key[key.len() - 1])
    }

    pub fn passed(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }
}

/// Product bump kernel `∝ exp(−1/(1 − u²))` on a midpoint rule; symmetric, so
/// affine functions are reproduced exactly.
fn kernel() -> Vec<(f64, f64)> {
    let m = KERNEL_NODES;
    let nodes: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let u = -1.0 + (2 * k + 1) as f64 / m as f64;
            (u, (-1.0 / (1.0 - u * u)).exp())
        })
        .collect();
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    nodes.into_iter().map(|(u, w)| (u, w / total)).collect()
}

fn mollify(g0: SummaryFn, bandwidth: f64) -> SummaryFn {
    if bandwidth == 0.0 {
        return g0;
    }
    let k = kernel();
    Arc::new(move |s, x| {
        let mut acc = 0.0;
        for &(u, wu) in &k {
            for &(v, wv) in &k {
                acc += wu * wv * g0(s - bandwidth * u, x - bandwidth * v);
            }
        }
        acc
    })
}

/// Mollified `g^n` on key vectors with sampled certificates
/// `|∂_i g^n| ≤ λ_i` and, when `curvature` is declared, `|∂_i ∂_j g^n| ≤ c λ_i λ_j`,
/// where `λ_i` is the Lipschitz measure of slot `i`.
pub fn smooth_terminal(
    g: &TerminalSpec,
    grid: &TimeGrid,
    mode: PathMode,
    bandwidth: f64,
    curvature: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<SmoothedTerminal> {
    let summary = g
        .summary
        .as_ref()
        .ok_or_else(|| Error::Metadata(format!("terminal `{}` is not of summary form", g.name)))?;
    let lam = g
        .lipschitz_measure
        .as_ref()
        .ok_or_else(|| Error::Metadata(format!("terminal `{}` declares no Lipschitz measure", g.name)))?;
    if !(bandwidth >= 0.0) {
        return Err(Error::config("bandwidth", "must be nonnegative"));
    }
    let g0 = mollify(summary.g0.clone(), bandwidth);
    let terminal = TerminalSpec::from_summary(&format!("{}~{bandwidth}", g.name), Summary::new(summary.measure.clone(), g0))
        .with_lipschitz_measure(lam.clone(), g.alpha.unwrap_or(1.0));
    let weights = lift_weights(&summary.measure, grid, mode);
    let slot_bound = lift_weights(lam, grid, mode);
    let mut out = SmoothedTerminal {
        terminal,
        grid: grid.clone(),
        mode,
        weights,
        bandwidth,
        certificates: Vec::new(),
    };
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let shifted = |key: &[f64], moves: &[(usize, f64)]| -> f64 {
        let mut k = key.to_vec();
        for &(i, d) in moves {
            k[i] += d;
        }
        out.on_key(&k)
    };
    let mut certs = Vec::new();
    for i in 0..=n {
        let h = FIRST_DIFF_STEP;
        let sampled = keys
            .iter()
            .map(|k| ((shifted(k, &[(i, h)]) - shifted(k, &[(i, -h)])) / (2.0 * h)).abs())
            .fold(0.0, f64::max);
        let bound = slot_bound[i];
        certs.push(SlotCertificate {
            order: 1,
            i,
            j: i,
            sampled,
            bound,
            pass: sampled <= bound * (1.0 + 1e-6) + 1e-9,
        });
    }
    if let Some(c) = curvature {
        let h = SECOND_DIFF_STEP;
        for i in 0..=n {
            for j in i..=n {
                let sampled = keys
                    .iter()
                    .map(|k| {
                        let pp = shifted(k, &[(i, h), (j, h)]);
                        let pm = shifted(k, &[(i, h), (j, -h)]);
                        let mp = shifted(k, &[(i, -h), (j, h)]);
                        let mm = shifted(k, &[(i, -h), (j, -h)]);
                        ((pp - pm - mp + mm) / (4.0 * h * h)).abs()
                    })
                    .fold(0.0, f64::max);
                let bound = c * slot_bound[i] * slot_bound[j];
                certs.push(SlotCertificate {
                    order: 2,
                    i,
                    j,
                    sampled,
                    bound,
                    pass: sampled <= bound * (1.0 + 1e-6) + 1e-8,
                });
            }
        }
    }
    out.certificates = certs;
    Ok(out)
}
