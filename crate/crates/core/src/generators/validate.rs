use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::timegrid_paths::{concat, Path};

use super::spec::{trace_prod, GeneratorSpec, half_sigma_sq};

/// A sampled point where a check failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub y: f64,
    pub z: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub samples: usize,
    pub violations: Vec<Witness>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub generator: String,
    pub checks: Vec<CheckResult>,
    pub unchecked: Vec<&'static str>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const MAX_WITNESSES: usize = 5;

fn random_path<R: Rng>(rng: &mut R, d: usize, horizon: f64) -> Path {
    let mut times = vec![0.0];
    for _ in 0..3 {
        times.push(rng.gen_range(0.02..0.98) * horizon);
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let rows = times
        .iter()
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    Path::piecewise_constant(horizon, times, rows).unwrap()
}

fn random_sym<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = rng.gen_range(-scale..scale);
            m[i * d + j] = v;
            m[j * d + i] = v;
        }
    }
    m
}

fn random_psd<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // B Bᵀ = 2 · (½ B Bᵀ)
    half_sigma_sq(&b, d).into_iter().map(|v| 2.0 * v).collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

struct Sample {
    t: f64,
    x: Path,
    y: f64,
    z: Vec<f64>,
    gamma: Vec<f64>,
}

fn draw<R: Rng>(rng: &mut R, d: usize, horizon: f64) -> Sample {
    Sample {
        t: rng.gen_range(0.0..horizon),
        x: random_path(rng, d, horizon),
        y: rng.gen_range(-3.0..3.0),
        z: (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        gamma: random_sym(rng, d, 3.0),
    }
}

/// Sampled checks of γ-monotonicity, the Lipschitz bound, non-anticipativity, and
/// (when supplied) the structure identity and the envelope inequality, on `[0, 1]`.
pub fn validate_assumptions(f: &GeneratorSpec, samples: usize, seed: u64) -> ValidationReport {
    validate_assumptions_on(f, 1.0, samples, seed)
}

pub fn validate_assumptions_on(f: &GeneratorSpec, horizon: f64, samples: usize, seed: u64) -> ValidationReport {
    let d = f.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mono = Vec::new();
    let mut lip = Vec::new();
    let mut anti = Vec::new();
    let mut ident = Vec::new();
    let mut env = Vec::new();
    let push = |v: &mut Vec<Witness>, w: Witness| {
        if v.len() < MAX_WITNESSES {
            v.push(w)
        }
    };
    for k in 0..samples {
        let s = draw(&mut rng, d, horizon);
        let base = f.evaluate(s.t, &s.x, s.y, &s.z, &s.gamma);

        let delta = if k == 0 {
            let mut e = vec![0.0; d * d];
            (0..d).for_each(|i| e[i * d + i] = 1.0);
            e
        } else {
            random_psd(&mut rng, d)
        };
        let g2: Vec<f64> = s.gamma.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let up = f.evaluate(s.t, &s.x, s.y, &s.z, &g2);
        if up < base - 1e-10 * (1.0 + base.abs()) {
            push(&mut mono, Witness {
                t: s.t,
                y: s.y,
                z: s.z.clone(),
                gamma: s.gamma.clone(),
                delta: Some(delta),
                lhs: up,
                rhs: base,
            });
        }

        let dy = rng.gen_range(-1.0..1.0);
        let dz: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dg = random_sym(&mut rng, d, 1.0);
        let z2: Vec<f64> = s.z.iter().zip(&dz).map(|(a, b)| a + b).collect();
        let g3: Vec<f64> = s.gamma.iter().zip(&dg).map(|(a, b)| a + b).collect();
        let moved = f.evaluate(s.t, &s.x, s.y + dy, &z2, &g3);
        let bound = f.lipschitz * (dy.abs() + l2(&dz) + l2(&dg));
        if (moved - base).abs() > bound + 1e-10 * (1.0 + base.abs()) {
            push(&mut lip, Witness {
                t: s.t,
                y: s.y,
                z: s.z.clone(),
                gamma: s.gamma.clone(),
                delta: None,
                lhs: (moved - base).abs(),
                rhs: bound,
            });
        }

        let stopped = f.evaluate(s.t, &s.x.stopped(s.t), s.y, &s.z, &s.gamma);
        let other = random_path(&mut rng, d, horizon);
        let cut = s.t + 0.5 * (horizon - s.t);
        let altered = f.evaluate(s.t, &concat(&s.x, cut, &other), s.y, &s.z, &s.gamma);
        for v in [stopped, altered] {
            if !close(v, base) {
                push(&mut anti, Witness {
                    t: s.t,
                    y: s.y,
                    z: s.z.clone(),
                    gamma: s.gamma.clone(),
                    delta: None,
                    lhs: v,
                    rhs: base,
                });
            }
        }

        if let Some(st) = &f.structure {
            let sigma = (st.sigma)(s.t, &s.x);
            let mu = (st.mu)(s.t, &s.x);
            let val = (st.h)(s.t, &s.x, s.y, &s.z, &s.gamma)
                + (st.r)(s.t, &s.x) * s.y
                + mu.iter().zip(&s.z).map(|(a, b)| a * b).sum::<f64>()
                + trace_prod(&half_sigma_sq(&sigma, d), &s.gamma, d)
                + f.shift;
            if !close(val, base) {
                push(&mut ident, Witness {
                    t: s.t,
                    y: s.y,
                    z: s.z.clone(),
                    gamma: s.gamma.clone(),
                    delta: None,
                    lhs: val,
                    rhs: base,
                });
            }
        }

        if let Some(e) = &f.envelope {
            let quad = |sig: &dyn Fn(&[f64]) -> Vec<f64>| -> (f64, f64) {
                e.controls.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                    let q = trace_prod(&half_sigma_sq(&sig(a), d), &s.gamma, d);
                    (lo.min(q), hi.max(q))
                })
            };
            let (inf_lo, _) = quad(&|a| (e.sigma_lo)(s.t, &s.x, a));
            let (_, sup_hi) = quad(&|a| (e.sigma_hi)(s.t, &s.x, a));
            let lower = (e.f_lo)(s.t, &s.x, s.y, &s.z) + inf_lo + f.shift;
            let upper = (e.f_hi)(s.t, &s.x, s.y, &s.z) + sup_hi + f.shift;
            let tol = 1e-10 * (1.0 + base.abs());
            if lower > base + tol || base > upper + tol {
                push(&mut env, Witness {
                    t: s.t,
                    y: s.y,
                    z: s.z.clone(),
                    gamma: s.gamma.clone(),
                    delta: None,
                    lhs: lower,
                    rhs: upper,
                });
            }
        }
    }
    let mut checks = vec![
        CheckResult {
            name: "gamma_monotone",
            samples,
            violations: mono,
        },
        CheckResult {
            name: "lipschitz",
            samples,
            violations: lip,
        },
        CheckResult {
            name: "non_anticipative",
            samples,
            violations: anti,
        },
    ];
    if f.structure.is_some() {
        checks.push(CheckResult {
            name: "structure_identity",
            samples,
            violations: ident,
        });
    }
    if f.envelope.is_some() {
        checks.push(CheckResult {
            name: "envelope",
            samples,
            violations: env,
        });
    }
    ValidationReport {
        generator: f.name.clone(),
        checks,
        unchecked: vec!["Ishii-type inequality with modulus ϖ_K (matrix-constrained quantifier, not sampled)"],
    }
}
