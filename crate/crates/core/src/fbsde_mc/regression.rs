use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::slab_pde::lift_weights;

use super::simulate::SamplePathBatch;
use super::McConfig;

/// Exponent vectors of all monomials of total degree `≤ degree` in `q` variables,
/// constant first.
pub fn monomial_exponents(q: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; q]];
    let mut last = vec![vec![0; q]];
    for _ in 0..degree {
        let mut next: Vec<Vec<usize>> = Vec::new();
        for e in &last {
            // raise only variables at or after the last raised one, to avoid repeats
            let start = e.iter().rposition(|&p| p > 0).unwrap_or(0);
            for v in start..q {
                let mut f = e.clone();
                f[v] += 1;
                next.push(f);
            }
        }
        out.extend(next.iter().cloned());
        last = next;
    }
    out
}

struct StepFit {
    active: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    exps: Vec<Vec<usize>>,
    pinv: DMatrix<f64>,
}

/// Least-squares projection onto polynomials in `(x, ∫Πx dλ, φ)` at each lattice
/// step, built once from a batch and reusable for other targets on the same draws.
pub struct Projector<'a> {
    batch: &'a SamplePathBatch,
    weights: Option<Vec<f64>>,
    fits: Vec<StepFit>,
}

impl<'a> Projector<'a> {
    pub fn new(batch: &'a SamplePathBatch, cfg: &McConfig) -> Result<Self> {
        let weights = cfg.basis_measure.as_ref().map(|m| lift_weights(m, &batch.grid, batch.mode));
        let mut p = Projector {
            batch,
            weights,
            fits: Vec::new(),
        };
        let mut fits = Vec::with_capacity(batch.steps());
        for k in 0..batch.steps() {
            fits.push(p.build(k, cfg.degree)?);
        }
        p.fits = fits;
        Ok(p)
    }

    pub fn batch(&self) -> &SamplePathBatch {
        self.batch
    }

    /// Raw regression coordinates of trajectory `m` at step `k`.
    pub fn coords(&self, m: usize, k: usize) -> Vec<f64> {
        self.coords_of(self.batch, m, k)
    }

    fn coords_of(&self, b: &SamplePathBatch, m: usize, k: usize) -> Vec<f64> {
        let d = b.dim;
        let mut c = b.x(m, k).to_vec();
        if let Some(w) = &self.weights {
            let j = b.slab_of_step[k];
            let key = b.key(m);
            for a in 0..d {
                c.push((0..=j).map(|l| w[l] * key[l * d + a]).sum());
            }
        }
        c.extend_from_slice(b.phi(m, k));
        c
    }

    fn basis_row(&self, fit: &StepFit, m: usize, k: usize) -> Vec<f64> {
        self.basis_row_of(self.batch, fit, m, k)
    }

    fn basis_row_of(&self, b: &SamplePathBatch, fit: &StepFit, m: usize, k: usize) -> Vec<f64> {
        let raw = self.coords_of(b, m, k);
        let z: Vec<f64> = fit
            .active
            .iter()
            .enumerate()
            .map(|(a, &v)| (raw[v] - fit.mean[a]) / fit.scale[a])
            .collect();
        fit.exps
            .iter()
            .map(|e| e.iter().zip(&z).map(|(&p, &zv)| zv.powi(p as i32)).product())
            .collect()
    }

    fn build(&self, k: usize, degree: usize) -> Result<StepFit> {
        let m = self.batch.samples;
        let q = self.coords(0, k).len();
        let (sum, sq) = (0..m)
            .into_par_iter()
            .map(|i| {
                let c = self.coords(i, k);
                let s2: Vec<f64> = c.iter().map(|v| v * v).collect();
                (c, s2)
            })
            .reduce(
                || (vec![0.0; q], vec![0.0; q]),
                |(mut a, mut b), (c, d)| {
                    for v in 0..q {
                        a[v] += c[v];
                        b[v] += d[v];
                    }
                    (a, b)
                },
            );
        let mut active = Vec::new();
        let mut mean = Vec::new();
        let mut scale = Vec::new();
        for v in 0..q {
            let mu = sum[v] / m as f64;
            let var = (sq[v] / m as f64 - mu * mu).max(0.0);
            if var.sqrt() > 1e-10 * (1.0 + mu.abs()) {
                active.push(v);
                mean.push(mu);
                scale.push(var.sqrt());
            }
        }
        let exps = monomial_exponents(active.len(), degree);
        let kb = exps.len();
        if m < kb {
            return Err(Error::RankDeficient {
                step: k,
                detail: format!("{kb} basis functions for {m} samples"),
            });
        }
        let mut fit = StepFit {
            active,
            mean,
            scale,
            exps,
            pinv: DMatrix::zeros(0, 0),
        };
        let gram = (0..m)
            .into_par_iter()
            .fold(
                || DMatrix::<f64>::zeros(kb, kb),
                |mut g, i| {
                    let r = DVector::from_vec(self.basis_row(&fit, i, k));
                    g.ger(1.0, &r, &r, 1.0);
                    g
                },
            )
            .reduce(|| DMatrix::zeros(kb, kb), |a, b| a + b);
        let svd = gram.svd(true, true);
        let smax = svd.singular_values.max();
        let pinv = svd
            .pseudo_inverse(1e-10 * smax.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::RankDeficient {
                step: k,
                detail: e.to_string(),
            })?;
        fit.pinv = pinv;
        Ok(fit)
    }

    /// Fitted conditional expectations at step `k` of each target (`M` values each).
    pub fn fit(&self, k: usize, targets: &[&[f64]]) -> Vec<Vec<f64>> {
        self.fit_with_coefficients(k, targets).0
    }

    /// Fitted values and the basis coefficients (one column per target).
    pub fn fit_with_coefficients(&self, k: usize, targets: &[&[f64]]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let fit = &self.fits[k];
        let kb = fit.exps.len();
        let nt = targets.len();
        let m = self.batch.samples;
        let rhs = (0..m)
            .into_par_iter()
            .fold(
                || DMatrix::<f64>::zeros(kb, nt),
                |mut acc, i| {
                    let r = self.basis_row(fit, i, k);
                    for (t, tv) in targets.iter().enumerate() {
                        for (a, ra) in r.iter().enumerate() {
                            acc[(a, t)] += ra * tv[i];
                        }
                    }
                    acc
                },
            )
            .reduce(|| DMatrix::zeros(kb, nt), |a, b| a + b);
        let beta = &fit.pinv * rhs;
        let rows: Vec<Vec<f64>> = (0..m).into_par_iter().map(|i| self.basis_row(fit, i, k)).collect();
        let values = (0..nt)
            .map(|t| {
                rows.iter()
                    .map(|r| r.iter().enumerate().map(|(a, ra)| ra * beta[(a, t)]).sum())
                    .collect()
            })
            .collect();
        let coefs = (0..nt).map(|t| beta.column(t).iter().copied().collect()).collect();
        (values, coefs)
    }

    /// Evaluates a fitted expansion at step `k` on trajectory `m` of another batch
    /// with the same lattice (normalization from this projector's batch).
    pub fn predict(&self, other: &SamplePathBatch, m: usize, k: usize, coefs: &[f64]) -> f64 {
        let r = self.basis_row_of(other, &self.fits[k], m, k);
        r.iter().zip(coefs).map(|(a, b)| a * b).sum()
    }
}
