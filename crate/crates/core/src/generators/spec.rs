use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::timegrid_paths::{AtomicMeasure, Path, PathMode, TimeGrid};

/// Coefficient of `(t, φ)` where `φ` are the path features.
pub type ScalarCoef = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// Vector or row-major matrix coefficient of `(t, φ)`.
pub type VectorCoef = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// Driver `h(t, φ, y, w)` with `w = σᵀz`.
pub type DriverFn = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;
pub type DriverGradFn = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// Black-box `F(t, x, y, z, γ)`.
pub type EvalFn = Arc<dyn Fn(f64, &Path, f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type PathScalarFn = Arc<dyn Fn(f64, &Path) -> f64 + Send + Sync>;
pub type PathVectorFn = Arc<dyn Fn(f64, &Path) -> Vec<f64> + Send + Sync>;

/// Non-anticipative path statistics the coefficients read.
#[derive(Clone)]
pub enum PathFeatures {
    None,
    /// `φ(t, x) = ∫_{[0,t]} x dλ` (one entry per coordinate).
    RunningIntegral(AtomicMeasure),
    /// Any functional of the stopped path; `len` entries.
    Custom {
        len: usize,
        f: PathVectorFn,
    },
}

impl PathFeatures {
    pub fn len(&self, dim: usize) -> usize {
        match self {
            PathFeatures::None => 0,
            PathFeatures::RunningIntegral(_) => dim,
            PathFeatures::Custom { len, .. } => *len,
        }
    }

    pub fn is_empty(&self, dim: usize) -> bool {
        self.len(dim) == 0
    }

    pub fn eval(&self, t: f64, x: &Path) -> Vec<f64> {
        match self {
            PathFeatures::None => Vec::new(),
            PathFeatures::RunningIntegral(m) => m.integrate_upto(x, t),
            PathFeatures::Custom { f, .. } => f(t, &x.stopped(t)),
        }
    }

    pub fn measure(&self) -> Option<&AtomicMeasure> {
        match self {
            PathFeatures::RunningIntegral(m) => Some(m),
            _ => None,
        }
    }
}

impl fmt::Debug for PathFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFeatures::None => write!(f, "None"),
            PathFeatures::RunningIntegral(m) => write!(f, "RunningIntegral({m:?})"),
            PathFeatures::Custom { len, .. } => write!(f, "Custom(len={len})"),
        }
    }
}

/// Partial derivatives of a driver, needed by the tangent system.
#[derive(Clone)]
pub struct DriverPartials {
    pub d_phi: DriverGradFn,
    pub d_y: DriverFn,
    pub d_w: DriverGradFn,
}

#[derive(Clone)]
pub struct Driver {
    pub f: DriverFn,
    pub lip_y: f64,
    pub lip_w: f64,
    pub partials: Option<DriverPartials>,
}

impl Driver {
    pub fn new(f: DriverFn, lip_y: f64, lip_w: f64) -> Self {
        Driver {
            f,
            lip_y,
            lip_w,
            partials: None,
        }
    }

    /// Driver that depends on `(t, φ)` only.
    pub fn source(f: ScalarCoef) -> Self {
        Driver::new(Arc::new(move |t, phi, _, _| f(t, phi)), 0.0, 0.0)
    }

    pub fn is_source(&self) -> bool {
        self.lip_y == 0.0 && self.lip_w == 0.0
    }
}

/// Derivatives of drift and volatility in the features (scalar state only).
#[derive(Clone)]
pub struct CoefSensitivities {
    pub drift_phi: VectorCoef,
    pub sigma_phi: VectorCoef,
}

/// One control branch: `½Tr[σσᵀγ] + μ·z + r·y + h(t, φ, y, σᵀz)`.
#[derive(Clone)]
pub struct Branch {
    pub control: Vec<f64>,
    pub sigma: VectorCoef,
    pub drift: VectorCoef,
    pub discount: ScalarCoef,
    pub driver: Option<Driver>,
    pub sensitivities: Option<CoefSensitivities>,
}

impl Branch {
    /// Constant coefficients, no driver.
    pub fn constant(control: Vec<f64>, sigma: Vec<f64>, drift: Vec<f64>, discount: f64) -> Self {
        Branch {
            control,
            sigma: Arc::new(move |_, _| sigma.clone()),
            drift: Arc::new(move |_, _| drift.clone()),
            discount: Arc::new(move |_, _| discount),
            driver: None,
            sensitivities: None,
        }
    }

    pub fn with_driver(mut self, driver: Driver) -> Self {
        self.driver = Some(driver);
        self
    }
}

/// Coefficients of one branch frozen at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchCoeffs {
    /// `½σσᵀ`, row-major.
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub drift: Vec<f64>,
    pub discount: f64,
}

/// The decomposition `F = H + r·y + μ·z + ½Tr[σσᵀγ]`.
#[derive(Clone)]
pub struct Structure {
    pub h: EvalFn,
    pub r: PathScalarFn,
    pub mu: PathVectorFn,
    pub sigma: PathVectorFn,
}

pub type EnvelopeSigma = Arc<dyn Fn(f64, &Path, &[f64]) -> Vec<f64> + Send + Sync>;
pub type EnvelopeBound = Arc<dyn Fn(f64, &Path, f64, &[f64]) -> f64 + Send + Sync>;

/// `F̲ + inf_a ½Tr[σ̲σ̲ᵀγ] ≤ F ≤ F̄ + sup_a ½Tr[σ̄σ̄ᵀγ]` over the finite set `A`.
#[derive(Clone)]
pub struct Envelope {
    pub controls: Vec<Vec<f64>>,
    pub sigma_lo: EnvelopeSigma,
    pub sigma_hi: EnvelopeSigma,
    pub f_lo: EnvelopeBound,
    pub f_hi: EnvelopeBound,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modulus {
    Lipschitz,
    Holder(f64),
}

impl Modulus {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Modulus::Lipschitz => u,
            Modulus::Holder(b) => u.max(0.0).powf(*b),
        }
    }

    /// `ϖ'(u) = √ϖ(u²)`.
    pub fn prime(&self, u: f64) -> f64 {
        self.eval(u * u).sqrt()
    }
}

#[derive(Clone)]
pub enum Form {
    Branches(Vec<Branch>),
    Custom(EvalFn),
}

#[derive(Clone)]
pub struct GeneratorSpec {
    pub name: String,
    pub dim: usize,
    pub features: PathFeatures,
    pub form: Form,
    pub lipschitz: f64,
    pub structure: Option<Structure>,
    pub envelope: Option<Envelope>,
    pub modulus: Modulus,
    /// Constant added to `F`.
    pub shift: f64,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("features", &self.features)
            .field("lipschitz", &self.lipschitz)
            .field("shift", &self.shift)
            .finish()
    }
}

pub(crate) fn half_sigma_sq(sigma: &[f64], d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = 0.5 * (0..d).map(|k| sigma[i * d + k] * sigma[j * d + k]).sum::<f64>();
        }
    }
    a
}

pub(crate) fn trace_prod(a: &[f64], gamma: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a[i * d + j] * gamma[j * d + i];
        }
    }
    s
}

/// `σᵀz`.
pub(crate) fn sigma_t_z(sigma: &[f64], z: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| (0..d).map(|i| sigma[i * d + j] * z[i]).sum())
        .collect()
}

impl GeneratorSpec {
    pub fn from_branches(name: &str, dim: usize, features: PathFeatures, branches: Vec<Branch>, lipschitz: f64) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            dim,
            features,
            form: Form::Branches(branches),
            lipschitz,
            structure: None,
            envelope: None,
            modulus: Modulus::Lipschitz,
            shift: 0.0,
        }
    }

    pub fn custom(name: &str, dim: usize, lipschitz: f64, f: EvalFn) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            dim,
            features: PathFeatures::None,
            form: Form::Custom(f),
            lipschitz,
            structure: None,
            envelope: None,
            modulus: Modulus::Lipschitz,
            shift: 0.0,
        }
    }

    pub fn with_structure(mut self, s: Structure) -> Self {
        self.structure = Some(s);
        self
    }

    pub fn with_envelope(mut self, e: Envelope) -> Self {
        self.envelope = Some(e);
        self
    }

    pub fn with_modulus(mut self, m: Modulus) -> Self {
        self.modulus = m;
        self
    }

    /// `F + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut g = self.clone();
        g.shift += c;
        g.name = format!("{}+{c}", self.name);
        g
    }

    pub fn branches(&self) -> Result<&[Branch]> {
        match &self.form {
            Form::Branches(b) => Ok(b),
            Form::Custom(_) => Err(Error::Unsupported(format!(
                "generator `{}` is a black box; solvers need the branch form",
                self.name
            ))),
        }
    }

    /// True when no coefficient reads the path.
    pub fn is_path_free(&self) -> bool {
        self.features.is_empty(self.dim)
    }

    pub fn coeffs(&self, branch: &Branch, t: f64, phi: &[f64]) -> BranchCoeffs {
        let sigma = (branch.sigma)(t, phi);
        BranchCoeffs {
            a: half_sigma_sq(&sigma, self.dim),
            sigma,
            drift: (branch.drift)(t, phi),
            discount: (branch.discount)(t, phi),
        }
    }

    /// Branch value given features.
    pub fn eval_branch(&self, branch: &Branch, t: f64, phi: &[f64], y: f64, z: &[f64], gamma: &[f64]) -> f64 {
        let d = self.dim;
        let c = self.coeffs(branch, t, phi);
        let mut v = trace_prod(&c.a, gamma, d)
            + c.drift.iter().zip(z).map(|(m, zi)| m * zi).sum::<f64>()
            + c.discount * y;
        if let Some(dr) = &branch.driver {
            v += (dr.f)(t, phi, y, &sigma_t_z(&c.sigma, z, d));
        }
        v
    }

    /// `F` given features.
    pub fn eval_features(&self, t: f64, phi: &[f64], y: f64, z: &[f64], gamma: &[f64]) -> f64 {
        match &self.form {
            Form::Branches(bs) => {
                self.shift
                    + bs.iter()
                        .map(|b| self.eval_branch(b, t, phi, y, z, gamma))
                        .fold(f64::NEG_INFINITY, f64::max)
            }
            Form::Custom(_) => panic!("eval_features on a black-box generator"),
        }
    }

    /// `F(t, x, y, z, γ)`.
    pub fn evaluate(&self, t: f64, x: &Path, y: f64, z: &[f64], gamma: &[f64]) -> f64 {
        match &self.form {
            Form::Branches(_) => self.eval_features(t, &self.features.eval(t, x), y, z, gamma),
            Form::Custom(f) => self.shift + f(t, x, y, z, gamma),
        }
    }

    /// Largest `|σ|` entry magnitude over branches at `(t, φ)`.
    pub fn sigma_max(&self, t: f64, phi: &[f64]) -> f64 {
        match &self.form {
            Form::Branches(bs) => bs
                .iter()
                .map(|b| {
                    let s = (b.sigma)(t, phi);
                    let d = self.dim;
                    (0..d)
                        .map(|i| (0..d).map(|k| s[i * d + k] * s[i * d + k]).sum::<f64>().sqrt())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max),
            Form::Custom(_) => 0.0,
        }
    }
}

/// The frozen key `[x]_i = (x_{t_0}, ..., x_{t_i})`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenKey {
    pub level: usize,
    pub slab: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl FrozenKey {
    pub fn new(grid: &TimeGrid, slab: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if slab > grid.n() {
            return Err(Error::Key(format!("slab {slab} beyond level with {} slabs", grid.n())));
        }
        if values.len() != (slab + 1) * dim {
            return Err(Error::Key(format!(
                "slab {slab} in dimension {dim} needs {} values, got {}",
                (slab + 1) * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Key("non-finite key entry".into()));
        }
        Ok(FrozenKey {
            level: grid.n(),
            slab,
            dim,
            values,
        })
    }

    pub fn from_path(grid: &TimeGrid, x: &Path, slab: usize) -> Result<Self> {
        Self::new(grid, slab, x.dim(), crate::timegrid_paths::grid_values(grid, x, slab))
    }

    pub fn extended(&self, grid: &TimeGrid, next: &[f64]) -> Result<Self> {
        let mut v = self.values.clone();
        v.extend_from_slice(next);
        Self::new(grid, self.slab + 1, self.dim, v)
    }

    /// `Π_{t_i}[x]` rebuilt from the key.
    pub fn path(&self, grid: &TimeGrid, mode: PathMode) -> Result<Path> {
        if grid.n() != self.level {
            return Err(Error::Key(format!(
                "key of level {} used with a grid of {} slabs",
                self.level,
                grid.n()
            )));
        }
        Path::from_grid_values(grid, &self.values, self.dim, mode)
    }
}

/// `F^n_i(t, ·) = F(t, Π_{t_i}[x], ·)` on one slab.
#[derive(Clone)]
pub struct FrozenGenerator<'a> {
    pub spec: &'a GeneratorSpec,
    pub key_path: Path,
    pub slab: (f64, f64),
    fixed_features: Option<Vec<f64>>,
}

impl<'a> FrozenGenerator<'a> {
    /// Frozen generator whose features are pinned (used by the lift, where they are
    /// carried as a state variable).
    pub fn with_features(spec: &'a GeneratorSpec, slab: (f64, f64), features: Vec<f64>, horizon: f64) -> Self {
        FrozenGenerator {
            spec,
            key_path: Path::constant(horizon, &vec![0.0; spec.dim], PathMode::CadlagPC).unwrap(),
            slab,
            fixed_features: Some(features),
        }
    }

    pub fn features(&self, t: f64) -> Vec<f64> {
        match &self.fixed_features {
            Some(f) => f.clone(),
            None => self.spec.features.eval(t, &self.key_path),
        }
    }

    pub fn evaluate(&self, t: f64, y: f64, z: &[f64], gamma: &[f64]) -> f64 {
        match &self.fixed_features {
            Some(f) => self.spec.eval_features(t, f, y, z, gamma),
            None => self.spec.evaluate(t, &self.key_path, y, z, gamma),
        }
    }

    pub fn coefficients(&self, t: f64) -> Result<Vec<BranchCoeffs>> {
        let phi = self.features(t);
        Ok(self
            .spec
            .branches()?
            .iter()
            .map(|b| self.spec.coeffs(b, t, &phi))
            .collect())
    }
}

/// Freezes `F` on the slab of `key` (path rebuilt in `mode`).
pub fn freeze<'a>(spec: &'a GeneratorSpec, grid: &TimeGrid, key: &FrozenKey, mode: PathMode) -> Result<FrozenGenerator<'a>> {
    if key.dim != spec.dim {
        return Err(Error::Key(format!("key dimension {} vs generator {}", key.dim, spec.dim)));
    }
    if key.slab >= grid.n() {
        return Err(Error::Key(format!("slab {} has no interval on this grid", key.slab)));
    }
    let key_path = key.path(grid, mode)?;
    Ok(FrozenGenerator {
        spec,
        key_path,
        slab: (grid.point(key.slab), grid.point(key.slab + 1)),
        fixed_features: None,
    })
}
