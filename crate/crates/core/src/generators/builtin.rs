//! Built-in generators. All of them use the branch form so every solver accepts them.

use std::sync::Arc;

use crate::timegrid_paths::{AtomicMeasure, Path};

use super::spec::*;

fn identity(d: usize, s: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = s;
    }
    m
}

fn sech2(u: f64) -> f64 {
    let c = u.cosh();
    1.0 / (c * c)
}

/// Structure decomposition of a one-branch generator: `H` is the driver.
fn single_branch_structure(features: PathFeatures, branch: Branch, d: usize) -> Structure {
    let (f1, f2, f3, f4) = (features.clone(), features.clone(), features.clone(), features);
    let (b1, b2, b3, b4) = (branch.clone(), branch.clone(), branch.clone(), branch);
    Structure {
        h: Arc::new(move |t, x, y, z, _| {
            let phi = f1.eval(t, x);
            match &b1.driver {
                Some(dr) => (dr.f)(t, &phi, y, &sigma_t_z(&(b1.sigma)(t, &phi), z, d)),
                None => 0.0,
            }
        }),
        r: Arc::new(move |t, x| (b2.discount)(t, &f2.eval(t, x))),
        mu: Arc::new(move |t, x| (b3.drift)(t, &f3.eval(t, x))),
        sigma: Arc::new(move |t, x| (b4.sigma)(t, &f4.eval(t, x))),
    }
}

/// Envelope of a one-branch generator: `A = {0}`, `σ̲ = σ̄ = σ`, `F̲ = F̄ = F - ½Tr[σσᵀγ]`.
fn single_branch_envelope(features: PathFeatures, branch: Branch, d: usize) -> Envelope {
    let (f1, f2) = (features.clone(), features);
    let b1 = branch.clone();
    let sig: EnvelopeSigma = Arc::new(move |t, x: &Path, _a: &[f64]| (b1.sigma)(t, &f1.eval(t, x)));
    let rest: EnvelopeBound = Arc::new(move |t, x: &Path, y, z: &[f64]| {
        let phi = f2.eval(t, x);
        let sigma = (branch.sigma)(t, &phi);
        let mut v = (branch.discount)(t, &phi) * y
            + (branch.drift)(t, &phi).iter().zip(z).map(|(m, q)| m * q).sum::<f64>();
        if let Some(dr) = &branch.driver {
            v += (dr.f)(t, &phi, y, &sigma_t_z(&sigma, z, d));
        }
        v
    });
    Envelope {
        controls: vec![vec![0.0]],
        sigma_lo: sig.clone(),
        sigma_hi: sig,
        f_lo: rest.clone(),
        f_hi: rest,
    }
}

/// `F = ½σ²Tr[γ]`.
pub fn heat(dim: usize, sigma: f64) -> GeneratorSpec {
    let branch = Branch::constant(vec![0.0], identity(dim, sigma), vec![0.0; dim], 0.0);
    let lip = 0.5 * sigma * sigma * (dim as f64).sqrt();
    GeneratorSpec::from_branches("heat", dim, PathFeatures::None, vec![branch.clone()], lip)
        .with_structure(single_branch_structure(PathFeatures::None, branch.clone(), dim))
        .with_envelope(single_branch_envelope(PathFeatures::None, branch, dim))
}

/// `F ≡ 0`.
pub fn zero(dim: usize) -> GeneratorSpec {
    let branch = Branch::constant(vec![0.0], vec![0.0; dim * dim], vec![0.0; dim], 0.0);
    GeneratorSpec::from_branches("zero", dim, PathFeatures::None, vec![branch.clone()], 0.0)
        .with_structure(single_branch_structure(PathFeatures::None, branch.clone(), dim))
        .with_envelope(single_branch_envelope(PathFeatures::None, branch, dim))
}

/// Black-Scholes-Barenblatt: `F = max_{a ∈ vols} ½a²γ` (scalar state).
pub fn bsb(vols: &[f64]) -> GeneratorSpec {
    assert!(!vols.is_empty());
    let branches = vols
        .iter()
        .map(|&a| Branch::constant(vec![a], vec![a], vec![0.0], 0.0))
        .collect();
    let lo = vols.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vols.iter().copied().fold(0.0, |m: f64, a| m.max(a.abs()));
    let h_vols = vols.to_vec();
    let structure = Structure {
        h: Arc::new(move |_, _, _, _, g| {
            h_vols
                .iter()
                .map(|a| 0.5 * (a * a - lo * lo) * g[0])
                .fold(f64::NEG_INFINITY, f64::max)
        }),
        r: Arc::new(|_, _| 0.0),
        mu: Arc::new(|_, _| vec![0.0]),
        sigma: Arc::new(move |_, _| vec![lo]),
    };
    let sig: EnvelopeSigma = Arc::new(|_, _, a| vec![a[0]]);
    let zero: EnvelopeBound = Arc::new(|_, _, _, _| 0.0);
    let envelope = Envelope {
        controls: vols.iter().map(|&a| vec![a]).collect(),
        sigma_lo: sig.clone(),
        sigma_hi: sig,
        f_lo: zero.clone(),
        f_hi: zero,
    };
    GeneratorSpec::from_branches("bsb", 1, PathFeatures::None, branches, 0.5 * hi * hi)
        .with_structure(structure)
        .with_envelope(envelope)
}

/// `F = max_{a ∈ drifts} a·z + ½σ²γ` (scalar state).
pub fn controlled_drift(drifts: &[f64], sigma: f64) -> GeneratorSpec {
    assert!(!drifts.is_empty());
    let branches = drifts
        .iter()
        .map(|&a| Branch::constant(vec![a], vec![sigma], vec![a], 0.0))
        .collect();
    let lo = drifts.iter().copied().fold(f64::INFINITY, f64::min);
    let amax = drifts.iter().fold(0.0, |m: f64, a| m.max(a.abs()));
    let hd = drifts.to_vec();
    let ld = drifts.to_vec();
    let ud = drifts.to_vec();
    let structure = Structure {
        h: Arc::new(move |_, _, _, z, _| {
            hd.iter().map(|a| (a - lo) * z[0]).fold(f64::NEG_INFINITY, f64::max)
        }),
        r: Arc::new(|_, _| 0.0),
        mu: Arc::new(move |_, _| vec![lo]),
        sigma: Arc::new(move |_, _| vec![sigma]),
    };
    let sig: EnvelopeSigma = Arc::new(move |_, _, _| vec![sigma]);
    let envelope = Envelope {
        controls: drifts.iter().map(|&a| vec![a]).collect(),
        sigma_lo: sig.clone(),
        sigma_hi: sig,
        f_lo: Arc::new(move |_, _, _, z| ld.iter().map(|a| a * z[0]).fold(f64::INFINITY, f64::min)),
        f_hi: Arc::new(move |_, _, _, z| ud.iter().map(|a| a * z[0]).fold(f64::NEG_INFINITY, f64::max)),
    };
    GeneratorSpec::from_branches(
        "controlled_drift",
        1,
        PathFeatures::None,
        branches,
        amax.max(0.5 * sigma * sigma),
    )
    .with_structure(structure)
    .with_envelope(envelope)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemilinearParams {
    pub horizon: f64,
    pub sigma0: f64,
    pub kappa: f64,
    pub rate: f64,
    pub c: f64,
    pub theta: f64,
}

impl Default for SemilinearParams {
    fn default() -> Self {
        SemilinearParams {
            horizon: 1.0,
            sigma0: 0.4,
            kappa: 0.3,
            rate: 0.1,
            c: 0.2,
            theta: 0.1,
        }
    }
}

/// Semilinear generator `½σ²γ + μ z + f(t, x, y, σz)` with `φ = ∫_0^t x ds`:
/// `σ = σ0(1 + ¼tanh φ)`, `μ = -κ tanh φ`, `f = -r y + c sin φ + θ(√(1 + w²) - 1)`.
pub fn semilinear(p: SemilinearParams) -> GeneratorSpec {
    let SemilinearParams {
        horizon,
        sigma0,
        kappa,
        rate,
        c,
        theta,
    } = p;
    let features = PathFeatures::RunningIntegral(AtomicMeasure::lebesgue(0.0, horizon).unwrap());
    let driver = Driver {
        f: Arc::new(move |_, phi, y, w| -rate * y + c * phi[0].sin() + theta * ((1.0 + w[0] * w[0]).sqrt() - 1.0)),
        lip_y: rate,
        lip_w: theta,
        partials: Some(DriverPartials {
            d_phi: Arc::new(move |_, phi, _, _| vec![c * phi[0].cos()]),
            d_y: Arc::new(move |_, _, _, _| -rate),
            d_w: Arc::new(move |_, _, _, w| vec![theta * w[0] / (1.0 + w[0] * w[0]).sqrt()]),
        }),
    };
    let branch = Branch {
        control: vec![0.0],
        sigma: Arc::new(move |_, phi| vec![sigma0 * (1.0 + 0.25 * phi[0].tanh())]),
        drift: Arc::new(move |_, phi| vec![-kappa * phi[0].tanh()]),
        discount: Arc::new(|_, _| 0.0),
        driver: Some(driver),
        sensitivities: Some(CoefSensitivities {
            drift_phi: Arc::new(move |_, phi| vec![-kappa * sech2(phi[0])]),
            sigma_phi: Arc::new(move |_, phi| vec![0.25 * sigma0 * sech2(phi[0])]),
        }),
    };
    let smax = 1.25 * sigma0;
    let lip = rate.max(kappa + theta * smax).max(0.5 * smax * smax);
    GeneratorSpec::from_branches("semilinear", 1, features.clone(), vec![branch.clone()], lip)
        .with_structure(single_branch_structure(features.clone(), branch.clone(), 1))
        .with_envelope(single_branch_envelope(features, branch, 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPathParams {
    pub horizon: f64,
    pub sigma0: f64,
    pub beta: f64,
    pub rho: f64,
    pub atom_time: f64,
    pub atom_weight: f64,
}

impl Default for LinearPathParams {
    fn default() -> Self {
        LinearPathParams {
            horizon: 1.0,
            sigma0: 0.5,
            beta: 0.2,
            rho: 0.1,
            atom_time: 0.5,
            atom_weight: 1.0,
        }
    }
}

/// Linear generator `r(φ)y + μ(φ)z + ½σ(φ)²γ` with `φ = ∫_{[0,t]} x dλ`, `λ` an atom:
/// `σ = σ0(1 + ½tanh φ)`, `μ = β tanh φ`, `r = -ρ(1 + ½tanh φ)`.
pub fn linear_path(p: LinearPathParams) -> GeneratorSpec {
    let LinearPathParams {
        sigma0,
        beta,
        rho,
        atom_time,
        atom_weight,
        ..
    } = p;
    let lambda = AtomicMeasure::dirac(atom_time, atom_weight).unwrap();
    let features = PathFeatures::RunningIntegral(lambda);
    let r = move |phi: f64| -rho * (1.0 + 0.5 * phi.tanh());
    let driver = Driver {
        f: Arc::new(move |_, phi, y, _| r(phi[0]) * y),
        lip_y: 1.5 * rho,
        lip_w: 0.0,
        partials: Some(DriverPartials {
            d_phi: Arc::new(move |_, phi, y, _| vec![-0.5 * rho * sech2(phi[0]) * y]),
            d_y: Arc::new(move |_, phi, _, _| r(phi[0])),
            d_w: Arc::new(|_, _, _, _| vec![0.0]),
        }),
    };
    let branch = Branch {
        control: vec![0.0],
        sigma: Arc::new(move |_, phi| vec![sigma0 * (1.0 + 0.5 * phi[0].tanh())]),
        drift: Arc::new(move |_, phi| vec![beta * phi[0].tanh()]),
        discount: Arc::new(|_, _| 0.0),
        driver: Some(driver),
        sensitivities: Some(CoefSensitivities {
            drift_phi: Arc::new(move |_, phi| vec![beta * sech2(phi[0])]),
            sigma_phi: Arc::new(move |_, phi| vec![0.5 * sigma0 * sech2(phi[0])]),
        }),
    };
    let smax = 1.5 * sigma0;
    let lip = (1.5 * rho).max(beta).max(0.5 * smax * smax);
    GeneratorSpec::from_branches("linear_path", 1, features.clone(), vec![branch.clone()], lip)
        .with_structure(single_branch_structure(features.clone(), branch.clone(), 1))
        .with_envelope(single_branch_envelope(features, branch, 1))
}

/// Built-in generator names accepted by [`by_name`].
pub const NAMES: &[&str] = &["heat", "zero", "bsb", "controlled_drift", "semilinear", "linear_path"];

/// Looks up a built-in by name with a parameter getter (`param(key, default)`).
pub fn by_name(name: &str, param: &dyn Fn(&str, f64) -> f64, list: &dyn Fn(&str, &[f64]) -> Vec<f64>) -> Option<GeneratorSpec> {
    let horizon = param("horizon", 1.0);
    Some(match name {
        "heat" => heat(param("dim", 1.0) as usize, param("sigma", 1.0)),
        "zero" => zero(param("dim", 1.0) as usize),
        "bsb" => bsb(&list("vols", &[0.1, 0.2])),
        "controlled_drift" => controlled_drift(&list("drifts", &[-1.0, 1.0]), param("sigma", 1.0)),
        "semilinear" => {
            let d = SemilinearParams::default();
            semilinear(SemilinearParams {
                horizon,
                sigma0: param("sigma0", d.sigma0),
                kappa: param("kappa", d.kappa),
                rate: param("rate", d.rate),
                c: param("c", d.c),
                theta: param("theta", d.theta),
            })
        }
        "linear_path" => {
            let d = LinearPathParams::default();
            linear_path(LinearPathParams {
                horizon,
                sigma0: param("sigma0", d.sigma0),
                beta: param("beta", d.beta),
                rho: param("rho", d.rho),
                atom_time: param("atom_time", 0.5 * horizon),
                atom_weight: param("atom_weight", d.atom_weight),
            })
        }
        _ => return None,
    })
}
