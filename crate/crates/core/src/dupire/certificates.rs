use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::fbsde_mc::{bump_derivative, tangent_fbsde, McConfig};
use crate::generators::{GeneratorSpec, TerminalSpec};
use crate::timegrid_paths::{AtomicMeasure, Ends, Path, TimeGrid};

use super::Evaluator;

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateConfig {
    /// Declared Hölder exponent of the terminal's derivative.
    pub alpha: f64,
    /// Allowed growth of a ratio when the ladder step halves.
    pub growth_factor: f64,
    /// Space bumps, coarsest first.
    pub space_steps: Vec<f64>,
    /// Time steps, coarsest first.
    pub time_steps: Vec<f64>,
    /// Bound on `|∇_x ϑ|`; `None` uses the total mass of `λ`.
    pub uniform_bound: Option<f64>,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig {
            alpha: 1.0,
            growth_factor: 2.0,
            space_steps: vec![0.4, 0.2, 0.1, 0.05],
            time_steps: vec![0.2, 0.1, 0.05, 0.025],
            uniform_bound: None,
        }
    }
}

/// One row of the certificate CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateRow {
    pub check_id: String,
    pub ladder_step: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub rows: Vec<CertificateRow>,
    /// `max |∇_x ϑ|` over every evaluated point.
    pub max_gradient: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Rows of one ladder. Each rung is bounded by `growth_factor` times the rung
/// before it; the coarsest rung is its own reference.
fn ladder_rows(id: &str, steps: &[f64], ratios: &[f64], growth: f64) -> Vec<CertificateRow> {
    steps
        .iter()
        .zip(ratios)
        .enumerate()
        .map(|(i, (&s, &r))| {
            let prev = if i == 0 { r } else { ratios[i - 1] };
            let bound = growth * prev + 1e-9;
            CertificateRow {
                check_id: id.to_string(),
                ladder_step: s,
                ratio: r,
                bound,
                pass: r <= bound,
            }
        })
        .collect()
}

/// Space and time Hölder ladders of `∇_x ϑ` around each fixture, plus the uniform bound.
///
/// Space: `|∇ϑ(t, x') − ∇ϑ(t, x)| / ((∫|x' − x| dλ)^α + |x'_t − x_t|^α)` with `x' = x + ε`.
/// Time: `|∇ϑ(t', x_{t∧}) − ∇ϑ(t, x)| / (|t' − t|^{α/(2+2α)} + λ([t, t')))`.
pub fn regularity_certificates(
    grad: Evaluator,
    lambda: &AtomicMeasure,
    fixtures: &[(String, f64, Path)],
    cfg: &CertificateConfig,
) -> Result<CertificateReport> {
    let a = cfg.alpha;
    let mut rows = Vec::new();
    let mut max_gradient = 0.0f64;
    for (id, t, x) in fixtures {
        let t = *t;
        let base = grad(t, x)?;
        let space: Vec<(f64, f64)> = cfg
            .space_steps
            .par_iter()
            .map(|&eps| {
                let xp = x.bumped(0.0, &vec![eps; x.dim()]);
                let v = grad(t, &xp)?;
                let dist = lambda.integrate_abs_diff(x, &xp, t).powf(a) + eps.abs().powf(a);
                Ok((v, (v - base).abs() / dist))
            })
            .collect::<Result<_>>()?;
        let stopped = x.stopped(t);
        let horizon = x.horizon();
        let time: Vec<(f64, f64)> = cfg
            .time_steps
            .par_iter()
            .map(|&h| {
                let tp = (t + h).min(horizon);
                let v = grad(tp, &stopped)?;
                let scale = (tp - t).powf(a / (2.0 + 2.0 * a)) + lambda.mass(t, tp, Ends::RightOpen);
                Ok((v, if scale > 0.0 { (v - base).abs() / scale } else { 0.0 }))
            })
            .collect::<Result<_>>()?;
        max_gradient = space
            .iter()
            .chain(&time)
            .map(|p| p.0.abs())
            .fold(max_gradient.max(base.abs()), f64::max);
        let sr: Vec<f64> = space.iter().map(|p| p.1).collect();
        let tr: Vec<f64> = time.iter().map(|p| p.1).collect();
        rows.extend(ladder_rows(&format!("space:{id}"), &cfg.space_steps, &sr, cfg.growth_factor));
        rows.extend(ladder_rows(&format!("time:{id}"), &cfg.time_steps, &tr, cfg.growth_factor));
    }
    let bound = cfg.uniform_bound.unwrap_or_else(|| lambda.total_mass());
    rows.push(CertificateRow {
        check_id: "uniform".into(),
        ladder_step: 0.0,
        ratio: max_gradient,
        bound,
        pass: max_gradient <= bound * (1.0 + 1e-6) + 1e-9,
    });
    Ok(CertificateReport { rows, max_gradient })
}

/// `∇_x ϑ` on both sides of an atom of `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomJump {
    pub before: f64,
    pub after: f64,
    pub jump: f64,
    pub atom: f64,
    /// `|jump − λ({t*})| / λ({t*})`.
    pub rel_err: f64,
}

pub fn atom_jump(grad: Evaluator, lambda: &AtomicMeasure, t_star: f64, x: &Path, h: f64) -> Result<AtomJump> {
    let before = grad(t_star - h, x)?;
    let after = grad(t_star + h, x)?;
    let atom = lambda.atom_at(t_star);
    let jump = before - after;
    Ok(AtomJump {
        before,
        after,
        jump,
        atom,
        rel_err: if atom > 0.0 { (jump - atom).abs() / atom } else { f64::INFINITY },
    })
}

/// Tangent derivative against forward bumps at `δ` and `δ/2` on common draws.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    pub tangent: f64,
    pub tangent_se: f64,
    pub bump: f64,
    pub bump_half: f64,
    /// `|∇Y − bump(δ)| / max(|∇Y|, 1e-6)`.
    pub rel_gap: f64,
    /// `|∇Y − bump(δ)| / |∇Y − bump(δ/2)|`, about 2 for a first-order bias.
    pub halving_ratio: f64,
}

pub fn tangent_bump_crosscheck(
    f: &GeneratorSpec,
    g: &TerminalSpec,
    grid: &TimeGrid,
    query: (f64, &Path),
    delta: f64,
    cfg: &McConfig,
) -> Result<CrossCheck> {
    let tan = tangent_fbsde(f, g, grid, query, None, cfg)?;
    let b1 = bump_derivative(f, g, grid, query, delta, cfg)?.derivative;
    let b2 = bump_derivative(f, g, grid, query, 0.5 * delta, cfg)?.derivative;
    let gap1 = (tan.grad - b1).abs();
    let gap2 = (tan.grad - b2).abs();
    Ok(CrossCheck {
        tangent: tan.grad,
        tangent_se: tan.grad_se,
        bump: b1,
        bump_half: b2,
        rel_gap: gap1 / tan.grad.abs().max(1e-6),
        halving_ratio: gap1 / gap2,
    })
}
