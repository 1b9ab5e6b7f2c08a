use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::timegrid_paths::{AtomicMeasure, Path, PathMode, TimeGrid};

use super::spec::FrozenKey;

pub type PathFn = Arc<dyn Fn(&Path) -> f64 + Send + Sync>;
pub type SummaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type FrechetFn = Arc<dyn Fn(&Path) -> LinearFunctional + Send + Sync>;

/// `h ↦ Σ_k c_k ∫ h dλ_k`, a signed combination of measures.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearFunctional {
    pub terms: Vec<(f64, AtomicMeasure)>,
}

impl LinearFunctional {
    pub fn apply(&self, h: &Path) -> f64 {
        self.terms
            .iter()
            .map(|(c, m)| c * m.integrate_upto(h, h.horizon())[0])
            .sum()
    }

    /// Total variation of the combination on an interval `[a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, m)| c.abs() * m.mass(a, b, crate::timegrid_paths::Ends::RightOpen))
            .sum()
    }
}

/// `g(x) = g0(∫ x dλ, x_T)` for scalar paths.
#[derive(Clone)]
pub struct Summary {
    pub measure: AtomicMeasure,
    pub g0: SummaryFn,
    pub d_s: Option<SummaryFn>,
    pub d_x: Option<SummaryFn>,
}

fn central(f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = 1e-6 * (1.0 + u.abs());
    (f(u + h) - f(u - h)) / (2.0 * h)
}

impl Summary {
    pub fn new(measure: AtomicMeasure, g0: SummaryFn) -> Self {
        Summary {
            measure,
            g0,
            d_s: None,
            d_x: None,
        }
    }

    pub fn with_partials(mut self, d_s: SummaryFn, d_x: SummaryFn) -> Self {
        self.d_s = Some(d_s);
        self.d_x = Some(d_x);
        self
    }

    pub fn stat(&self, x: &Path) -> f64 {
        self.measure.integrate_upto(x, x.horizon())[0]
    }

    pub fn grad(&self, s: f64, x: f64) -> (f64, f64) {
        let gs = match &self.d_s {
            Some(f) => f(s, x),
            None => central(|u| (self.g0)(u, x), s),
        };
        let gx = match &self.d_x {
            Some(f) => f(s, x),
            None => central(|u| (self.g0)(s, u), x),
        };
        (gs, gx)
    }
}

#[derive(Clone)]
pub struct TerminalSpec {
    pub name: String,
    pub dim: usize,
    pub eval: PathFn,
    /// `L` with `|g(x)| ≤ L(1 + ‖x‖)`; `None` outside the linear-growth class.
    pub growth: Option<f64>,
    pub summary: Option<Summary>,
    pub frechet: Option<FrechetFn>,
    /// `λ` with `|g(x) - g(x')| ≤ ∫ |x - x'| dλ`.
    pub lipschitz_measure: Option<AtomicMeasure>,
    pub alpha: Option<f64>,
}

impl fmt::Debug for TerminalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("growth", &self.growth)
            .field("summary", &self.summary.as_ref().map(|s| s.measure.clone()))
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl TerminalSpec {
    pub fn new(name: &str, dim: usize, eval: PathFn) -> Self {
        TerminalSpec {
            name: name.to_string(),
            dim,
            eval,
            growth: None,
            summary: None,
            frechet: None,
            lipschitz_measure: None,
            alpha: None,
        }
    }

    /// Scalar terminal of summary form; the Fréchet derivative comes from the partials.
    pub fn from_summary(name: &str, summary: Summary) -> Self {
        let s2 = summary.clone();
        let s3 = summary.clone();
        TerminalSpec {
            name: name.to_string(),
            dim: 1,
            eval: Arc::new(move |x| {
                let s = s2.stat(x);
                (s2.g0)(s, x.value1(x.horizon()))
            }),
            growth: None,
            summary: Some(summary),
            frechet: Some(Arc::new(move |x| {
                let s = s3.stat(x);
                let (gs, gx) = s3.grad(s, x.value1(x.horizon()));
                let mut terms = Vec::new();
                if gs != 0.0 && !s3.measure.is_zero() {
                    terms.push((gs, s3.measure.clone()));
                }
                if gx != 0.0 {
                    terms.push((gx, AtomicMeasure::dirac(x.horizon(), 1.0).unwrap()));
                }
                LinearFunctional { terms }
            })),
            lipschitz_measure: None,
            alpha: None,
        }
    }

    pub fn with_growth(mut self, l: f64) -> Self {
        self.growth = Some(l);
        self
    }

    pub fn with_lipschitz_measure(mut self, m: AtomicMeasure, alpha: f64) -> Self {
        self.lipschitz_measure = Some(m);
        self.alpha = Some(alpha);
        self
    }

    pub fn evaluate(&self, x: &Path) -> f64 {
        (self.eval)(x)
    }

    /// `g + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        let f = self.eval.clone();
        out.eval = Arc::new(move |x| f(x) + c);
        out.name = format!("{}+{c}", self.name);
        out.growth = self.growth.map(|l| l + c.abs());
        if let Some(s) = &self.summary {
            let g0 = s.g0.clone();
            let mut s = s.clone();
            s.g0 = Arc::new(move |u, x| g0(u, x) + c);
            out.summary = Some(s);
        }
        out
    }

    /// `g + h`; the summary survives when both share the measure or one reads `x_T` only.
    pub fn plus(&self, other: &TerminalSpec) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dim("terminals of different dimension".into()));
        }
        let (f, h) = (self.eval.clone(), other.eval.clone());
        let summary = match (&self.summary, &other.summary) {
            (Some(a), Some(b)) => {
                let measure = if b.measure.is_zero() || a.measure == b.measure {
                    Some(a.measure.clone())
                } else if a.measure.is_zero() {
                    Some(b.measure.clone())
                } else {
                    None
                };
                measure.map(|m| {
                    let (ga, gb) = (a.g0.clone(), b.g0.clone());
                    let (a, b) = (a.clone(), b.clone());
                    let (a2, b2) = (a.clone(), b.clone());
                    Summary::new(m, Arc::new(move |s, x| ga(s, x) + gb(s, x))).with_partials(
                        Arc::new(move |s, x| a.grad(s, x).0 + b.grad(s, x).0),
                        Arc::new(move |s, x| a2.grad(s, x).1 + b2.grad(s, x).1),
                    )
                })
            }
            _ => None,
        };
        let mut out = match summary {
            Some(s) => TerminalSpec::from_summary(&format!("{}+{}", self.name, other.name), s),
            None => TerminalSpec::new(
                &format!("{}+{}", self.name, other.name),
                self.dim,
                Arc::new(move |x| f(x) + h(x)),
            ),
        };
        out.growth = match (self.growth, other.growth) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Ok(out)
    }
}

/// `g^n([x]_n) = g(Π^n[x])`, the path rebuilt from a full key.
pub fn terminal_on_key(g: &TerminalSpec, grid: &TimeGrid, key: &FrozenKey, mode: PathMode) -> Result<f64> {
    if key.slab != grid.n() {
        return Err(Error::Key(format!(
            "terminal needs all {} grid values, key stops at slab {}",
            grid.n() + 1,
            key.slab
        )));
    }
    if key.dim != g.dim {
        return Err(Error::Key(format!("key dimension {} vs terminal {}", key.dim, g.dim)));
    }
    Ok(g.evaluate(&key.path(grid, mode)?))
}

fn lebesgue_on(horizon: f64) -> AtomicMeasure {
    AtomicMeasure::lebesgue(0.0, horizon).unwrap()
}

/// `g(x) = x_T²`.
pub fn square() -> TerminalSpec {
    TerminalSpec::from_summary(
        "square",
        Summary::new(AtomicMeasure::zero(), Arc::new(|_, x| x * x))
            .with_partials(Arc::new(|_, _| 0.0), Arc::new(|_, x| 2.0 * x)),
    )
}

/// `g(x) = x_T`.
pub fn linear() -> TerminalSpec {
    TerminalSpec::from_summary(
        "linear",
        Summary::new(AtomicMeasure::zero(), Arc::new(|_, x| x))
            .with_partials(Arc::new(|_, _| 0.0), Arc::new(|_, _| 1.0)),
    )
    .with_growth(1.0)
}

/// `g(x) = |x_T|`.
pub fn abs_terminal(horizon: f64) -> TerminalSpec {
    TerminalSpec::from_summary("abs", Summary::new(AtomicMeasure::zero(), Arc::new(|_, x| x.abs())))
        .with_growth(1.0)
        .with_lipschitz_measure(AtomicMeasure::dirac(horizon, 1.0).unwrap(), 1.0)
}

/// `g(x) = ∫ x dλ`.
pub fn integral(lambda: AtomicMeasure) -> TerminalSpec {
    let mass = lambda.total_mass();
    TerminalSpec::from_summary(
        "integral",
        Summary::new(lambda.clone(), Arc::new(|s, _| s))
            .with_partials(Arc::new(|_, _| 1.0), Arc::new(|_, _| 0.0)),
    )
    .with_growth(mass)
    .with_lipschitz_measure(lambda, 1.0)
}

/// `g(x) = ∫_0^T x_s ds`.
pub fn running_integral(horizon: f64) -> TerminalSpec {
    integral(lebesgue_on(horizon))
}

/// `g(x) = (∫ x dλ)²`.
pub fn integral_squared(lambda: AtomicMeasure) -> TerminalSpec {
    TerminalSpec::from_summary(
        "integral_squared",
        Summary::new(lambda, Arc::new(|s, _| s * s))
            .with_partials(Arc::new(|s, _| 2.0 * s), Arc::new(|_, _| 0.0)),
    )
}

pub(crate) fn huber(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.5 * u * u
    } else {
        u.abs() - 0.5
    }
}

/// `g(x) = H(∫ x dλ)` with the Huber function `H` (1-Lipschitz, `H'' ≤ 1`).
pub fn huber_integral(lambda: AtomicMeasure) -> TerminalSpec {
    let mass = lambda.total_mass();
    TerminalSpec::from_summary(
        "huber_integral",
        Summary::new(lambda.clone(), Arc::new(|s, _| huber(s)))
            .with_partials(Arc::new(|s, _| s.clamp(-1.0, 1.0)), Arc::new(|_, _| 0.0)),
    )
    .with_growth(mass)
    .with_lipschitz_measure(lambda, 1.0)
}

/// `g(x) = sin(∫ x dλ) + a·x_T`.
pub fn sin_integral_plus_terminal(lambda: AtomicMeasure, a: f64, horizon: f64) -> TerminalSpec {
    let lip = lambda
        .clone()
        .with_atom(horizon, a.abs())
        .unwrap();
    TerminalSpec::from_summary(
        "sin_integral_plus_terminal",
        Summary::new(lambda, Arc::new(move |s, x| s.sin() + a * x))
            .with_partials(Arc::new(|s, _| s.cos()), Arc::new(move |_, _| a)),
    )
    .with_growth(1.0 + a.abs())
    .with_lipschitz_measure(lip, 1.0)
}

/// `g(x) = x_{t1}·x_T`, not of summary form.
pub fn product(t1: f64) -> TerminalSpec {
    TerminalSpec::new(
        "product",
        1,
        Arc::new(move |x| x.value1(t1) * x.value1(x.horizon())),
    )
}

/// Terminal of a `d`-dimensional path: `|x_T|²`.
pub fn norm_squared(dim: usize) -> TerminalSpec {
    TerminalSpec::new(
        "norm_squared",
        dim,
        Arc::new(|x| x.value(x.horizon()).iter().map(|v| v * v).sum()),
    )
}

/// Built-in terminal names accepted by [`terminal_by_name`].
pub const TERMINAL_NAMES: &[&str] = &[
    "square",
    "linear",
    "abs",
    "integral",
    "running_integral",
    "integral_squared",
    "huber_integral",
    "sin_integral_plus_terminal",
    "product",
    "norm_squared",
];

/// Looks up a built-in terminal. Measures are `density · Lebesgue[0, T]` plus an
/// optional atom (`atom_time`, `atom_weight`).
pub fn terminal_by_name(name: &str, param: &dyn Fn(&str, f64) -> f64) -> Option<TerminalSpec> {
    let horizon = param("horizon", 1.0);
    let density = param("density", 1.0);
    let atom_weight = param("atom_weight", 0.0);
    let measure = || -> Option<AtomicMeasure> {
        let mut m = lebesgue_on(horizon).scaled(density).ok()?;
        if atom_weight != 0.0 {
            m = m.with_atom(param("atom_time", 0.5 * horizon), atom_weight).ok()?;
        }
        Some(m)
    };
    Some(match name {
        "square" => square(),
        "linear" => linear(),
        "abs" => abs_terminal(horizon),
        "integral" => integral(measure()?),
        "running_integral" => running_integral(horizon),
        "integral_squared" => integral_squared(measure()?),
        "huber_integral" => huber_integral(measure()?),
        "sin_integral_plus_terminal" => sin_integral_plus_terminal(measure()?, param("a", 0.5), horizon),
        "product" => product(param("t1", 0.5 * horizon)),
        "norm_squared" => norm_squared(param("dim", 1.0) as usize),
        _ => return None,
    })
}
