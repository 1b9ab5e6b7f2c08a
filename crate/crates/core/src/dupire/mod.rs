//! Vertical derivatives: central bumps with a Richardson proxy, the tangent
//! backend, terminal smoothing with slot-wise derivative certificates, the
//! structure-condition probe and Hölder certificates for `∇_x ϑ`.

mod certificates;
mod probe;
mod smooth;

pub use certificates::{
    atom_jump, regularity_certificates, tangent_bump_crosscheck, AtomJump, CertificateConfig, CertificateReport,
    CertificateRow, CrossCheck,
};
pub use probe::{structure_condition_probe, PairProbe, PairStatus, ProbeReport};
pub use smooth::{smooth_terminal, SlotCertificate, SmoothedTerminal, DEFAULT_BANDWIDTH};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbsde_mc::{tangent_fbsde, McConfig};
use crate::generators::{GeneratorSpec, TerminalSpec};
use crate::timegrid_paths::{Path, TimeGrid};

/// Real-valued functional `(t, x) ↦ u(t, x)`.
pub type Evaluator<'a> = &'a (dyn Fn(f64, &Path) -> Result<f64> + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivMethod {
    CentralBump,
    TangentFbsde,
}

/// How the current value is bumped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpKind {
    /// `x ⊞_t (x_t + δe_k)`: stopped at `t`, then bumped (frozen slab evaluation).
    Pointwise,
    /// `x + δe_k 1_{[t,T]}`, the direction of the limit object.
    Tail,
}

pub const DEFAULT_DELTAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeEstimate {
    pub value: Vec<f64>,
    /// Bump size; 0 for the tangent backend.
    pub delta: f64,
    pub method: DerivMethod,
    pub bump: Option<BumpKind>,
    /// `max_k |D_δ − D_{δ/2}|` for bumps, the Monte Carlo standard error for the tangent.
    pub error_proxy: f64,
}

impl DerivativeEstimate {
    /// Proxy below 10% of the estimate, or an estimate that is numerically zero.
    pub fn accepted(&self) -> bool {
        let size = self.value.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        size < 1e-8 || self.error_proxy < 0.1 * size
    }
}

fn bumped(x: &Path, t: f64, shift: &[f64], kind: BumpKind) -> Path {
    match kind {
        BumpKind::Pointwise => x.stopped(t).bumped(t, shift),
        BumpKind::Tail => x.bumped(t, shift),
    }
}

/// Central differences `(u(x⁺) − u(x⁻)) / 2δ` per coordinate.
pub fn central_difference(u: Evaluator, t: f64, x: &Path, delta: f64, kind: BumpKind) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::config("delta", "must be positive"));
    }
    let d = x.dim();
    (0..d)
        .into_par_iter()
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = delta;
            let up = u(t, &bumped(x, t, &e, kind))?;
            e[k] = -delta;
            let down = u(t, &bumped(x, t, &e, kind))?;
            Ok((up - down) / (2.0 * delta))
        })
        .collect()
}

/// Central bump at `δ` with the Richardson proxy from `δ/2`.
pub fn vertical_derivative(u: Evaluator, t: f64, x: &Path, delta: f64, kind: BumpKind) -> Result<DerivativeEstimate> {
    let full = central_difference(u, t, x, delta, kind)?;
    let half = central_difference(u, t, x, 0.5 * delta, kind)?;
    let error_proxy = full
        .iter()
        .zip(&half)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(DerivativeEstimate {
        value: full,
        delta,
        method: DerivMethod::CentralBump,
        bump: Some(kind),
        error_proxy,
    })
}

/// Estimates over a bump ladder, largest `δ` first.
pub fn derivative_ladder(u: Evaluator, t: f64, x: &Path, deltas: &[f64], kind: BumpKind) -> Result<Vec<DerivativeEstimate>> {
    deltas.iter().map(|&d| vertical_derivative(u, t, x, d, kind)).collect()
}

/// `∇_x Y_t` in the direction `1_{[t,T]}` from the tangent system.
pub fn tangent_derivative(f: &GeneratorSpec, g: &TerminalSpec, grid: &TimeGrid, query: (f64, &Path), cfg: &McConfig) -> Result<DerivativeEstimate> {
    let est = tangent_fbsde(f, g, grid, query, None, cfg)?;
    Ok(DerivativeEstimate {
        value: vec![est.grad],
        delta: 0.0,
        method: DerivMethod::TangentFbsde,
        bump: Some(BumpKind::Tail),
        error_proxy: est.grad_se,
    })
}
