use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, TerminalSpec};
use crate::timegrid_paths::Path;

use super::lift::LiftSolution;

pub const TOL_MONOTONE: f64 = 1e-9;

/// Sampled check of `F¹ ≥ F²` and `g¹ ≥ g²`.
#[derive(Clone, Debug, PartialEq)]
pub struct PremiseReport {
    pub samples: usize,
    pub generator_gap: f64,
    pub terminal_gap: f64,
}

impl PremiseReport {
    pub fn holds(&self) -> bool {
        self.generator_gap <= TOL_MONOTONE && self.terminal_gap <= TOL_MONOTONE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `max (v − u)` over shared nodes and the query; `≤ 0` when ordered.
    pub max_violation: f64,
    pub nodes: usize,
    /// The sampled premise failed, so a violation proves nothing.
    pub inconclusive: bool,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.inconclusive || self.max_violation <= TOL_MONOTONE
    }
}

fn random_path(rng: &mut ChaCha8Rng, dim: usize, horizon: f64) -> Path {
    let k = rng.gen_range(1..6);
    let mut times: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..horizon)).collect();
    times.push(0.0);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let values = times
        .iter()
        .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    Path::piecewise_constant(horizon, times, values).unwrap()
}

/// Samples the largest `F² − F¹` and `g² − g¹` over random arguments.
pub fn comparison_premise(
    f1: &GeneratorSpec,
    f2: &GeneratorSpec,
    g1: &TerminalSpec,
    g2: &TerminalSpec,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<PremiseReport> {
    if f1.dim != f2.dim || g1.dim != g2.dim || f1.dim != g1.dim {
        return Err(Error::Dim("compared problems live in different dimensions".into()));
    }
    let d = f1.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen_gap = f64::NEG_INFINITY;
    let mut term_gap = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = random_path(&mut rng, d, horizon);
        let t = rng.gen_range(0.0..horizon);
        let y = rng.gen_range(-3.0..3.0);
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let gamma: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let gamma: Vec<f64> = (0..d * d)
            .map(|k| 0.5 * (gamma[k] + gamma[(k % d) * d + k / d]))
            .collect();
        gen_gap = gen_gap.max(f2.evaluate(t, &x, y, &z, &gamma) - f1.evaluate(t, &x, y, &z, &gamma));
        term_gap = term_gap.max(g2.evaluate(&x) - g1.evaluate(&x));
    }
    Ok(PremiseReport {
        samples,
        generator_gap: gen_gap,
        terminal_gap: term_gap,
    })
}

/// Checks `u ≥ v − tol` on every node the two lift solves share and at the query.
pub fn comparison_check(u: &LiftSolution, v: &LiftSolution, premise: Option<&PremiseReport>) -> Result<ComparisonReport> {
    if u.fields.len() != v.fields.len() {
        return Err(Error::Config {
            field: "comparison".into(),
            msg: "solves cover different slabs".into(),
        });
    }
    let mut worst = v.value - u.value;
    let mut nodes = 1;
    for (a, b) in u.fields.iter().zip(&v.fields) {
        if !a.same_layout(b) {
            return Err(Error::Config {
                field: "comparison".into(),
                msg: format!("slab {} solved on different lattices; fix radius and dt", a.slab),
            });
        }
        for (p, q) in a.values.iter().zip(&b.values) {
            worst = worst.max(q - p);
        }
        nodes += a.values.len();
    }
    Ok(ComparisonReport {
        max_violation: worst,
        nodes,
        inconclusive: premise.is_some_and(|p| !p.holds()),
    })
}
