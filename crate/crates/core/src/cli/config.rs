//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 7
//! output = "out"            # overridden by --out or PPDE_OUTPUT
//! jobs = 1                  # worker threads
//!
//! [instance]
//! generator = "heat"
//! terminal = "integral_squared"
//! params = { sigma = 1.0 }  # numbers, or lists for `vols` / `drifts`
//!
//! [grid]
//! sequence = "dyadic"       # dyadic | triadic | power:<base>
//! horizon = 1.0
//! levels = [1, 5]           # inclusive
//! compare = "triadic"       # gridcheck only
//! compare_levels = [1, 3]
//!
//! [backend]
//! kind = "lift"             # lift | exact | mc
//! dx = 0.05
//! mode = "pc"               # pc | pl
//!
//! [query]
//! t = 0.0
//! fixtures = ["constant"]
//! constants = [0.0]
//! ```
//!
//! The remaining sections (`checks`, `modulus`, `stability`, `classical`,
//! `dupire`, `validate`) hold per-subcommand settings; every field has a default.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};

use serde::Deserialize;

use crate::approximation::fixtures::fixture;
use crate::approximation::{ApproxConfig, Backend};
use crate::error::{Error, Result};
use crate::fbsde_mc::McConfig;
use crate::generators::builtin::{by_name, NAMES};
use crate::generators::terminal::{terminal_by_name, TERMINAL_NAMES};
use crate::generators::{GeneratorSpec, Modulus, TerminalSpec};
use crate::slab_pde::{FdConfig, Scheme};
use crate::timegrid_paths::io::parse_path;
use crate::timegrid_paths::{GridSequence, Path, PathMode};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub generator: String,
    pub terminal: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_sequence")]
    pub sequence: String,
    #[serde(default = "one")]
    pub horizon: f64,
    pub levels: Vec<usize>,
    pub compare: Option<String>,
    pub compare_levels: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_dx")]
    pub dx: f64,
    pub radius: Option<f64>,
    pub dt: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub fixtures: Vec<String>,
    #[serde(default)]
    pub constants: Vec<f64>,
    /// Path literal files, relative to the config file.
    #[serde(default)]
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_cauchy")]
    pub cauchy_tol: f64,
    #[serde(default = "default_rate_floor")]
    pub rate_floor: f64,
    #[serde(default)]
    pub rate_slack: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    #[serde(default = "default_ladder")]
    pub ladder: Vec<f64>,
    /// `lipschitz` or `holder:<exponent>`.
    #[serde(default = "default_modulus")]
    pub modulus: String,
    #[serde(default)]
    pub mesh_term: bool,
    #[serde(default = "two")]
    pub max_variation: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    /// Parameter scaled by `1 + 1/k`.
    #[serde(default = "default_stab_param")]
    pub param: String,
    #[serde(default = "default_ratio_tol")]
    pub ratio_tol: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    /// `heat_square`, `heat_running_integral` or `bsb_square`.
    #[serde(default = "default_solution")]
    pub solution: String,
    #[serde(default = "default_cauchy")]
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DupireConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_ladder")]
    pub space_steps: Vec<f64>,
    #[serde(default = "default_time_steps")]
    pub time_steps: Vec<f64>,
    pub uniform_bound: Option<f64>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    pub curvature: Option<f64>,
    #[serde(default = "default_probe_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_validate_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: Option<String>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    pub instance: InstanceConfig,
    pub grid: GridConfig,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    pub query: QueryConfig,
    #[serde(default = "default_checks")]
    pub checks: ChecksConfig,
    #[serde(default = "default_modulus_cfg")]
    pub modulus: ModulusConfig,
    #[serde(default = "default_stability")]
    pub stability: StabilityConfig,
    #[serde(default = "default_classical")]
    pub classical: ClassicalConfig,
    #[serde(default = "default_dupire")]
    pub dupire: DupireConfig,
    #[serde(default = "default_validate")]
    pub validate: ValidateConfig,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn yes() -> bool {
    true
}
fn default_sequence() -> String {
    "dyadic".into()
}
fn default_kind() -> String {
    "lift".into()
}
fn default_dx() -> f64 {
    0.05
}
fn default_scheme() -> String {
    "explicit".into()
}
fn default_mode() -> String {
    "pc".into()
}
fn default_samples() -> usize {
    20_000
}
fn default_substeps() -> usize {
    8
}
fn default_degree() -> usize {
    2
}
fn default_blocks() -> usize {
    16
}
fn default_jobs() -> usize {
    1
}
fn default_cauchy() -> f64 {
    1e-2
}
fn default_rate_floor() -> f64 {
    0.25
}
fn default_ladder() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05]
}
fn default_time_steps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn default_modulus() -> String {
    "lipschitz".into()
}
fn default_ks() -> Vec<usize> {
    vec![2, 4, 8, 16]
}
fn default_stab_param() -> String {
    "sigma".into()
}
fn default_ratio_tol() -> f64 {
    0.3
}
fn default_solution() -> String {
    "heat_square".into()
}
fn default_delta() -> f64 {
    1e-2
}
fn default_bandwidth() -> f64 {
    crate::dupire::DEFAULT_BANDWIDTH
}
fn default_probe_samples() -> usize {
    16
}
fn default_validate_samples() -> usize {
    200
}

fn empty<T: for<'de> Deserialize<'de>>() -> T {
    toml::from_str("").expect("all fields defaulted")
}
fn default_backend() -> BackendConfig {
    empty()
}
fn default_checks() -> ChecksConfig {
    empty()
}
fn default_modulus_cfg() -> ModulusConfig {
    empty()
}
fn default_stability() -> StabilityConfig {
    empty()
}
fn default_classical() -> ClassicalConfig {
    empty()
}
fn default_dupire() -> DupireConfig {
    empty()
}
fn default_validate() -> ValidateConfig {
    empty()
}

fn parse_mode(s: &str) -> Result<PathMode> {
    match s {
        "pc" | "cadlag" => Ok(PathMode::CadlagPC),
        "pl" | "continuous" => Ok(PathMode::ContinuousPL),
        other => Err(Error::config("backend.mode", format!("unknown mode `{other}` (pc | pl)"))),
    }
}

fn parse_sequence(field: &str, s: &str, horizon: f64) -> Result<GridSequence> {
    match s {
        "dyadic" => GridSequence::dyadic(horizon),
        "triadic" => GridSequence::triadic(horizon),
        other => match other.strip_prefix("power:").and_then(|b| b.parse::<usize>().ok()) {
            Some(b) => GridSequence::power(horizon, b),
            None => Err(Error::config(field, format!("unknown sequence `{other}` (dyadic | triadic | power:<base>)"))),
        },
    }
}

fn level_range(field: &str, v: &[usize]) -> Result<std::ops::RangeInclusive<usize>> {
    match v {
        [] => Err(Error::config(field, "must not be empty")),
        [n] => Ok(*n..=*n),
        [a, b] if a <= b => Ok(*a..=*b),
        _ => Err(Error::config(field, "expected [n] or [n_min, n_max] with n_min ≤ n_max")),
    }
}

impl ExperimentConfig {
    /// Parses and validates; TOML errors carry their line and column.
    pub fn parse(text: &str, base_dir: &FsPath) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Parse {
                line,
                msg: e.message().to_string(),
            }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        Self::parse(&text, &dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.levels()?;
        if let Some(c) = &self.grid.compare {
            parse_sequence("grid.compare", c, self.grid.horizon)?;
            level_range("grid.compare_levels", self.grid.compare_levels.as_deref().unwrap_or(&[]))?;
        }
        self.sequence()?;
        self.generator()?;
        self.terminal()?;
        self.backend()?;
        if self.jobs == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        if self.queries()?.is_empty() {
            return Err(Error::config("query", "no query paths (fixtures, constants or files)"));
        }
        self.modulus_kind()?;
        Ok(())
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        match self.instance.params.get(key) {
            Some(ParamValue::Number(v)) => *v,
            _ if key == "horizon" => self.grid.horizon,
            _ => default,
        }
    }

    fn list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.instance.params.get(key) {
            Some(ParamValue::List(v)) => v.clone(),
            Some(ParamValue::Number(v)) => vec![*v],
            None => default.to_vec(),
        }
    }

    pub fn levels(&self) -> Result<std::ops::RangeInclusive<usize>> {
        level_range("grid.levels", &self.grid.levels)
    }

    pub fn compare(&self) -> Result<(GridSequence, std::ops::RangeInclusive<usize>)> {
        let name = self
            .grid
            .compare
            .as_deref()
            .ok_or_else(|| Error::config("grid.compare", "gridcheck needs a second sequence"))?;
        Ok((
            parse_sequence("grid.compare", name, self.grid.horizon)?,
            level_range("grid.compare_levels", self.grid.compare_levels.as_deref().unwrap_or(&[]))?,
        ))
    }

    pub fn sequence(&self) -> Result<GridSequence> {
        parse_sequence("grid.sequence", &self.grid.sequence, self.grid.horizon)
    }

    /// Generator and terminal with parameter `key` (number or list) multiplied by `factor`.
    pub fn instance_scaled(&self, key: &str, factor: f64) -> Result<(GeneratorSpec, TerminalSpec)> {
        let scale = |k: &str| if k == key { factor } else { 1.0 };
        let param = |k: &str, d: f64| self.param(k, d) * scale(k);
        let list = |k: &str, d: &[f64]| self.list(k, d).into_iter().map(|v| v * scale(k)).collect();
        let f = by_name(&self.instance.generator, &param, &list).ok_or_else(|| {
            Error::config(
                "instance.generator",
                format!("unknown generator `{}`; known: {NAMES:?}", self.instance.generator),
            )
        })?;
        let g = terminal_by_name(&self.instance.terminal, &param).ok_or_else(|| {
            Error::config(
                "instance.terminal",
                format!("unknown terminal `{}`; known: {TERMINAL_NAMES:?}", self.instance.terminal),
            )
        })?;
        Ok((f, g))
    }

    pub fn generator(&self) -> Result<GeneratorSpec> {
        Ok(self.instance_scaled("", 1.0)?.0)
    }

    pub fn terminal(&self) -> Result<TerminalSpec> {
        Ok(self.instance_scaled("", 1.0)?.1)
    }

    pub fn mode(&self) -> Result<PathMode> {
        parse_mode(&self.backend.mode)
    }

    pub fn fd(&self) -> Result<FdConfig> {
        let b = &self.backend;
        if !(b.dx > 0.0) {
            return Err(Error::config("backend.dx", "must be positive"));
        }
        let mut fd = FdConfig::default().with_dx(b.dx).with_mode(self.mode()?);
        fd.radius = b.radius;
        fd.dt = b.dt;
        fd.scheme = match b.scheme.as_str() {
            "explicit" => Scheme::Explicit,
            "implicit" => Scheme::ImplicitPolicy,
            other => return Err(Error::config("backend.scheme", format!("unknown scheme `{other}`"))),
        };
        Ok(fd)
    }

    pub fn mc(&self) -> Result<McConfig> {
        let b = &self.backend;
        let mut mc = McConfig::default()
            .with_samples(b.samples)
            .with_seed(self.seed)
            .with_substeps(b.substeps)
            .with_mode(self.mode()?);
        mc.degree = b.degree;
        mc.antithetic = b.antithetic;
        mc.blocks = b.blocks;
        mc.validate().map_err(|e| match e {
            Error::Config { field, msg } => Error::config(format!("backend.{field}"), msg),
            other => other,
        })?;
        Ok(mc)
    }

    pub fn backend(&self) -> Result<Backend> {
        match self.backend.kind.as_str() {
            "lift" => Ok(Backend::Lift(self.fd()?)),
            "exact" => Ok(Backend::Exact(self.fd()?)),
            "mc" => Ok(Backend::Mc(self.mc()?)),
            other => Err(Error::config("backend.kind", format!("unknown backend `{other}` (lift | exact | mc)"))),
        }
    }

    pub fn approx(&self) -> ApproxConfig {
        ApproxConfig {
            cauchy_tol: self.checks.cauchy_tol,
            rate_floor: self.checks.rate_floor,
            rate_slack: self.checks.rate_slack,
        }
    }

    pub fn modulus_kind(&self) -> Result<Modulus> {
        let s = self.modulus.modulus.as_str();
        if s == "lipschitz" {
            return Ok(Modulus::Lipschitz);
        }
        s.strip_prefix("holder:")
            .and_then(|b| b.parse::<f64>().ok())
            .filter(|b| *b > 0.0 && *b <= 1.0)
            .map(Modulus::Holder)
            .ok_or_else(|| Error::config("modulus.modulus", format!("expected `lipschitz` or `holder:<β in (0,1]>`, got `{s}`")))
    }

    /// Query paths with their ids, at `query.t`.
    pub fn queries(&self) -> Result<Vec<(String, Path)>> {
        let horizon = self.grid.horizon;
        let mut out = Vec::new();
        for id in &self.query.fixtures {
            out.push((id.clone(), fixture(id).map_err(|e| Error::config("query.fixtures", e.to_string()))?));
        }
        for &c in &self.query.constants {
            out.push((format!("const:{c}"), Path::constant(horizon, &[c], PathMode::CadlagPC)?));
        }
        for f in &self.query.files {
            let p = self.base_dir.join(f);
            let text = std::fs::read_to_string(&p).map_err(|e| Error::config("query.files", format!("{}: {e}", p.display())))?;
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| f.clone());
            out.push((id, parse_path(&text)?));
        }
        Ok(out)
    }
}
