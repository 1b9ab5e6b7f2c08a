use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::approximation::{
    approximate_solution, classical_consistency, grid_independence, level_value, modulus_check, stability_experiment,
    write_csv, Backend, LadderKind, LadderRow,
};
use crate::dupire::{
    central_difference, derivative_ladder, regularity_certificates, structure_condition_probe, tangent_derivative, BumpKind,
    CertificateConfig, PairStatus,
};
use crate::error::{Error, Result};
use crate::fbsde_mc::{hjb_value_mc, HjbMethod};
use crate::generators::validate_assumptions_on;
use crate::slab_pde::solve_vn_lift;
use crate::timegrid_paths::{Path, TimeGrid};

use super::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve { dump_field: bool },
    Converge,
    Gridcheck,
    Modulus,
    Stability,
    Classical,
    Mc,
    Dupire,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Converge => "converge",
            Command::Gridcheck => "gridcheck",
            Command::Modulus => "modulus",
            Command::Stability => "stability",
            Command::Classical => "classical",
            Command::Mc => "mc",
            Command::Dupire => "dupire",
            Command::Validate => "validate",
        }
    }
}

/// One output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
    /// Data rows (header excluded for CSV).
    pub rows: usize,
}

impl Artifact {
    fn csv<R: Serialize>(name: &str, rows: &[R]) -> Result<Self> {
        Ok(Artifact {
            name: name.to_string(),
            contents: write_csv(rows)?,
            rows: rows.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub command: &'static str,
    pub artifacts: Vec<Artifact>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
    pub passed: bool,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    rows: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    crate_version: &'a str,
    config_sha256: String,
    seed: u64,
    passed: bool,
    files: Vec<FileEntry<'a>>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory: `--out`, then `PPDE_OUTPUT`, then `output`, then `out`.
pub fn output_dir(cfg: &ExperimentConfig, flag: Option<&FsPath>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os("PPDE_OUTPUT") {
        return PathBuf::from(p);
    }
    match &cfg.output {
        Some(o) => cfg.base_dir.join(o),
        None => PathBuf::from("out"),
    }
}

/// Writes every artifact and `manifest.json`; returns the manifest path.
pub fn write_outputs(outcome: &RunOutcome, cfg: &ExperimentConfig, config_text: &str, dir: &FsPath) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
        files.push(FileEntry {
            name: &a.name,
            rows: a.rows,
            sha256: sha256(a.contents.as_bytes()),
        });
    }
    let manifest = Manifest {
        command: outcome.command,
        crate_version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256(config_text.as_bytes()),
        seed: cfg.seed,
        passed: outcome.passed,
        files,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Backend(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Aligns a CSV text into columns.
pub fn render_table(csv_text: &str) -> String {
    let rows: Vec<Vec<String>> = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes())
        .records()
        .filter_map(|r| r.ok())
        .map(|r| r.iter().map(|c| c.to_string()).collect())
        .collect();
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

struct Ctx {
    f: crate::generators::GeneratorSpec,
    g: crate::generators::TerminalSpec,
    backend: Backend,
    queries: Vec<(String, Path)>,
    t: f64,
}

impl Ctx {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Ctx {
            f: cfg.generator()?,
            g: cfg.terminal()?,
            backend: cfg.backend()?,
            queries: cfg.queries()?,
            t: cfg.query.t,
        })
    }

    fn finest_grid(&self, cfg: &ExperimentConfig) -> Result<TimeGrid> {
        cfg.sequence()?.level(*cfg.levels()?.end())
    }
}

/// Runs one subcommand without touching the filesystem.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let ctx = Ctx::new(cfg)?;
    let (artifacts, summary, passed) = match cmd {
        Command::Solve { dump_field } => solve(cfg, &ctx, dump_field)?,
        Command::Converge => converge(cfg, &ctx)?,
        Command::Gridcheck => gridcheck(cfg, &ctx)?,
        Command::Modulus => modulus(cfg, &ctx)?,
        Command::Stability => stability(cfg, &ctx)?,
        Command::Classical => classical(cfg, &ctx)?,
        Command::Mc => mc(cfg, &ctx)?,
        Command::Dupire => dupire(cfg, &ctx)?,
        Command::Validate => validate(cfg, &ctx)?,
    };
    Ok(RunOutcome {
        command: cmd.name(),
        artifacts,
        summary,
        passed,
    })
}

type Parts = (Vec<Artifact>, Vec<String>, bool);

#[derive(Serialize)]
struct SolveRow<'a> {
    n: usize,
    mesh: f64,
    t: f64,
    path_id: &'a str,
    value: f64,
    se_if_mc: Option<f64>,
}

fn solve(cfg: &ExperimentConfig, ctx: &Ctx, dump_field: bool) -> Result<Parts> {
    let seq = cfg.sequence()?;
    let mut rows = Vec::new();
    for n in cfg.levels()? {
        let grid = seq.level(n)?;
        for (id, x) in &ctx.queries {
            let e = level_value(&ctx.f, &ctx.g, &grid, (ctx.t, x), &ctx.backend)?;
            rows.push(SolveRow {
                n,
                mesh: grid.mesh(),
                t: ctx.t,
                path_id: id,
                value: e.value,
                se_if_mc: e.se,
            });
        }
    }
    let mut artifacts = vec![Artifact::csv("solve.csv", &rows)?];
    if dump_field {
        let Backend::Lift(fd) = &ctx.backend else {
            return Err(Error::config("backend.kind", "--dump-field needs the lift backend"));
        };
        let (_, x) = &ctx.queries[0];
        let sol = solve_vn_lift(&ctx.f, &ctx.g, &ctx.finest_grid(cfg)?, (ctx.t, x), fd)?;
        let contents: String = sol.fields.iter().map(|f| f.dump()).collect();
        let count = contents.lines().filter(|l| !l.starts_with('#')).count();
        artifacts.push(Artifact {
            name: "solve_field.txt".into(),
            contents,
            rows: count,
        });
    }
    Ok((artifacts, vec![], true))
}

fn converge(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let seq = cfg.sequence()?;
    let acfg = cfg.approx();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut passed = true;
    for (id, x) in &ctx.queries {
        let r = approximate_solution(&ctx.f, &ctx.g, &seq, (ctx.t, x), cfg.levels()?, &ctx.backend, &acfg)?;
        rows.extend(r.csv_rows(id));
        let rate_ok = r.levels.len() < 3 || r.rate_ok;
        passed &= r.cauchy && rate_ok;
        let slope = r.rate.slope().map_or("-".to_string(), |s| format!("{s:.3}"));
        summary.push(format!(
            "{id}: limit {:.6}  rate {slope}  gap bound {:.2e}  cauchy {}  rate_ok {}",
            r.limit, r.gap_bound, r.cauchy, rate_ok
        ));
    }
    Ok((vec![Artifact::csv("converge.csv", &rows)?], summary, passed))
}

#[derive(Serialize)]
struct GridcheckRow<'a> {
    path_id: &'a str,
    limit_a: f64,
    limit_b: f64,
    discrepancy: f64,
    tol: f64,
}

fn gridcheck(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let a = cfg.sequence()?;
    let (b, lb) = cfg.compare()?;
    let queries: Vec<(f64, Path)> = ctx.queries.iter().map(|(_, x)| (ctx.t, x.clone())).collect();
    let r = grid_independence(&ctx.f, &ctx.g, (&a, cfg.levels()?), (&b, lb), &queries, &ctx.backend, &cfg.approx())?;
    let rows: Vec<GridcheckRow> = r
        .rows
        .iter()
        .map(|row| GridcheckRow {
            path_id: &ctx.queries[row.query].0,
            limit_a: row.limit_a,
            limit_b: row.limit_b,
            discrepancy: row.discrepancy,
            tol: row.tol,
        })
        .collect();
    let summary = vec![format!(
        "{} vs {}: max discrepancy {:.3e}, tol_grid {:.3e}",
        a.name(),
        b.name(),
        r.max_discrepancy,
        r.tol_grid()
    )];
    Ok((vec![Artifact::csv("gridcheck.csv", &rows)?], summary, r.passed()))
}

#[derive(Serialize)]
struct ModulusRow<'a> {
    path_id: &'a str,
    kind: LadderKind,
    step: f64,
    distance: f64,
    diff: f64,
    scale: f64,
    ratio: Option<f64>,
}

fn modulus(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let grid = ctx.finest_grid(cfg)?;
    let m = &cfg.modulus;
    let kind = cfg.modulus_kind()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut passed = true;
    for (id, x) in &ctx.queries {
        let (space, time) = modulus_check(&ctx.f, &ctx.g, &grid, &ctx.backend, (ctx.t, x), &m.ladder, kind, m.mesh_term)?;
        for table in [&space, &time] {
            passed &= table.bounded(m.max_variation);
            rows.extend(table.rows.iter().map(|r: &LadderRow| ModulusRow {
                path_id: id,
                kind: r.kind,
                step: r.step,
                distance: r.distance,
                diff: r.diff,
                scale: r.scale,
                ratio: r.ratio,
            }));
        }
        summary.push(format!(
            "{id}: space variation {:.3}, time variation {:.3} (allowed {})",
            space.variation(),
            time.variation(),
            m.max_variation
        ));
    }
    Ok((vec![Artifact::csv("modulus.csv", &rows)?], summary, passed))
}

#[derive(Serialize)]
struct StabilityCsvRow<'a> {
    path_id: &'a str,
    k: usize,
    limit: f64,
    gap: f64,
    base_limit: f64,
}

fn stability(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let s = &cfg.stability;
    if s.ks.is_empty() {
        return Err(Error::config("stability.ks", "must not be empty"));
    }
    let seq = cfg.sequence()?;
    let family = |k: usize| {
        cfg.instance_scaled(&s.param, 1.0 + 1.0 / k as f64)
            .expect("instance validated at load")
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut passed = true;
    for (id, x) in &ctx.queries {
        let r = stability_experiment(
            &family,
            &s.ks,
            (&ctx.f, &ctx.g),
            &seq,
            (ctx.t, x),
            cfg.levels()?,
            &ctx.backend,
            &cfg.approx(),
        )?;
        passed &= r.ratio_test(s.ratio_tol);
        let ratios: Vec<String> = r.order_ratios().iter().map(|v| format!("{v:.3}")).collect();
        summary.push(format!("{id}: order ratios [{}] (tol {})", ratios.join(", "), s.ratio_tol));
        rows.extend(r.rows.iter().map(|row| StabilityCsvRow {
            path_id: id,
            k: row.k,
            limit: row.limit,
            gap: row.gap,
            base_limit: r.base_limit,
        }));
    }
    Ok((vec![Artifact::csv("stability.csv", &rows)?], summary, passed))
}

type Solution = Box<dyn Fn(f64, &Path) -> f64 + Sync>;

fn classical_solution(cfg: &ExperimentConfig) -> Result<Solution> {
    let horizon = cfg.grid.horizon;
    let number = |k: &str, d: f64| match cfg.instance.params.get(k) {
        Some(super::config::ParamValue::Number(v)) => *v,
        _ => d,
    };
    match cfg.classical.solution.as_str() {
        "heat_square" => {
            let sigma = number("sigma", 1.0);
            Ok(Box::new(move |t, x| x.value1(t).powi(2) + sigma * sigma * (horizon - t)))
        }
        "heat_running_integral" => {
            let lam = crate::timegrid_paths::AtomicMeasure::lebesgue(0.0, horizon)?;
            Ok(Box::new(move |t, x| lam.integrate_upto(x, t)[0] + x.value1(t) * (horizon - t)))
        }
        "bsb_square" => {
            let vols = match cfg.instance.params.get("vols") {
                Some(super::config::ParamValue::List(v)) => v.clone(),
                Some(super::config::ParamValue::Number(v)) => vec![*v],
                None => vec![0.1, 0.2],
            };
            let top = vols.iter().fold(0.0f64, |a, v| a.max(v * v));
            Ok(Box::new(move |t, x| x.value1(t).powi(2) + top * (horizon - t)))
        }
        other => Err(Error::config(
            "classical.solution",
            format!("unknown solution `{other}` (heat_square | heat_running_integral | bsb_square)"),
        )),
    }
}

#[derive(Serialize)]
struct ClassicalCsvRow<'a> {
    n: usize,
    path_id: &'a str,
    t: f64,
    value: f64,
    exact: f64,
    gap: f64,
}

fn classical(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let w = classical_solution(cfg)?;
    let queries: Vec<(f64, Path)> = ctx.queries.iter().map(|(_, x)| (ctx.t, x.clone())).collect();
    let r = classical_consistency(&ctx.f, &ctx.g, &*w, &queries, &cfg.sequence()?, cfg.levels()?, &ctx.backend)?;
    let rows: Vec<ClassicalCsvRow> = r
        .rows
        .iter()
        .map(|row| ClassicalCsvRow {
            n: row.level,
            path_id: &ctx.queries[row.query].0,
            t: row.t,
            value: row.value,
            exact: row.exact,
            gap: row.gap,
        })
        .collect();
    let gap = r.finest_max_gap();
    let summary = vec![format!("finest max gap {gap:.3e} (tol {})", cfg.classical.tol)];
    Ok((vec![Artifact::csv("classical.csv", &rows)?], summary, gap <= cfg.classical.tol))
}

#[derive(Serialize)]
struct McRow<'a> {
    n: usize,
    mesh: f64,
    t: f64,
    path_id: &'a str,
    value: f64,
    se: f64,
    method: &'static str,
}

fn mc(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let mcfg = cfg.mc()?;
    let seq = cfg.sequence()?;
    let mut rows = Vec::new();
    for n in cfg.levels()? {
        let grid = seq.level(n)?;
        for (id, x) in &ctx.queries {
            let e = hjb_value_mc(&ctx.f, &ctx.g, &grid, (ctx.t, x), &mcfg)?;
            rows.push(McRow {
                n,
                mesh: grid.mesh(),
                t: ctx.t,
                path_id: id,
                value: e.value,
                se: e.se,
                method: match e.method {
                    HjbMethod::Single => "single",
                    HjbMethod::Exhaustive { .. } => "exhaustive",
                    HjbMethod::DriverSup => "driver_sup",
                },
            });
        }
    }
    Ok((vec![Artifact::csv("mc.csv", &rows)?], vec![], true))
}

#[derive(Serialize)]
struct DerivRow<'a> {
    path_id: &'a str,
    method: &'static str,
    delta: Option<f64>,
    value: f64,
    error_proxy: f64,
    accepted: bool,
}

#[derive(Serialize)]
struct ProbeRow {
    i: usize,
    j: usize,
    p: Option<f64>,
    residual: f64,
    status: String,
}

fn dupire(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let grid = ctx.finest_grid(cfg)?;
    let d = &cfg.dupire;
    if !(d.delta > 0.0) {
        return Err(Error::config("dupire.delta", "must be positive"));
    }
    let mut rows = Vec::new();
    for (id, x) in &ctx.queries {
        match &ctx.backend {
            Backend::Mc(mcfg) => {
                let e = tangent_derivative(&ctx.f, &ctx.g, &grid, (ctx.t, x), mcfg)?;
                rows.push(DerivRow {
                    path_id: id,
                    method: "tangent_fbsde",
                    delta: None,
                    value: e.value[0],
                    error_proxy: e.error_proxy,
                    accepted: e.accepted(),
                });
            }
            backend => {
                let u = |t: f64, y: &Path| -> Result<f64> { Ok(level_value(&ctx.f, &ctx.g, &grid, (t, y), backend)?.value) };
                let deltas = [d.delta, 0.5 * d.delta, 0.25 * d.delta];
                for e in derivative_ladder(&u, ctx.t, x, &deltas, BumpKind::Tail)? {
                    rows.push(DerivRow {
                        path_id: id,
                        method: "central_bump",
                        delta: Some(e.delta),
                        value: e.value[0],
                        error_proxy: e.error_proxy,
                        accepted: e.accepted(),
                    });
                }
            }
        }
    }
    let mut passed = rows.iter().all(|r| r.accepted);
    let mut artifacts = vec![Artifact::csv("dupire.csv", &rows)?];
    let mut summary = Vec::new();
    // certificates need a λ: the declared Lipschitz measure, else the summary's
    if let Some(lambda) = ctx.g.lipschitz_measure.as_ref().or(ctx.g.summary.as_ref().map(|s| &s.measure)) {
        let grad = |t: f64, y: &Path| -> Result<f64> {
            match &ctx.backend {
                Backend::Mc(mcfg) => Ok(tangent_derivative(&ctx.f, &ctx.g, &grid, (t, y), mcfg)?.value[0]),
                backend => {
                    let u = |t: f64, y: &Path| -> Result<f64> { Ok(level_value(&ctx.f, &ctx.g, &grid, (t, y), backend)?.value) };
                    Ok(central_difference(&u, t, y, d.delta, BumpKind::Tail)?[0])
                }
            }
        };
        let fixtures: Vec<(String, f64, Path)> = ctx.queries.iter().map(|(id, x)| (id.clone(), ctx.t, x.clone())).collect();
        let ccfg = CertificateConfig {
            alpha: d.alpha,
            space_steps: d.space_steps.clone(),
            time_steps: d.time_steps.clone(),
            uniform_bound: d.uniform_bound,
            ..CertificateConfig::default()
        };
        let rep = regularity_certificates(&grad, lambda, &fixtures, &ccfg)?;
        summary.push(format!(
            "certificates: {} rows, {} failing, max |grad| {:.4}",
            rep.rows.len(),
            rep.rows.iter().filter(|r| !r.pass).count(),
            rep.max_gradient
        ));
        passed &= rep.passed();
        artifacts.push(Artifact::csv("dupire_certificates.csv", &rep.rows)?);
    }
    let probe = structure_condition_probe(&ctx.g, &grid, d.samples, cfg.seed)?;
    let probe_rows: Vec<ProbeRow> = probe
        .pairs
        .iter()
        .map(|p| ProbeRow {
            i: p.i,
            j: p.j,
            p: p.p,
            residual: p.residual,
            status: match &p.status {
                PairStatus::Analytic => "analytic".into(),
                PairStatus::Fitted => "fitted".into(),
                PairStatus::Degenerate(why) => format!("degenerate: {why}"),
                PairStatus::Fails => "fails".into(),
            },
        })
        .collect();
    summary.push(format!(
        "transfer coefficients on {} pairs: structure condition {}",
        probe.pairs.len(),
        if probe.holds() { "holds" } else { "not established" }
    ));
    artifacts.push(Artifact::csv("dupire_probe.csv", &probe_rows)?);
    Ok((artifacts, summary, passed))
}

#[derive(Serialize)]
struct ValidateRow {
    check: &'static str,
    samples: usize,
    violations: usize,
    passed: bool,
}

fn validate(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Parts> {
    let r = validate_assumptions_on(&ctx.f, cfg.grid.horizon, cfg.validate.samples, cfg.seed);
    let rows: Vec<ValidateRow> = r
        .checks
        .iter()
        .map(|c| ValidateRow {
            check: c.name,
            samples: c.samples,
            violations: c.violations.len(),
            passed: c.passed(),
        })
        .collect();
    let mut summary = Vec::new();
    if !r.unchecked.is_empty() {
        summary.push(format!("unchecked: {}", r.unchecked.join(", ")));
    }
    for c in r.checks.iter().filter(|c| !c.passed()) {
        if let Some(w) = c.violations.first() {
            summary.push(format!("{}: witness t={} y={} lhs={} rhs={}", c.name, w.t, w.y, w.lhs, w.rhs));
        }
    }
    Ok((vec![Artifact::csv("validate.csv", &rows)?], summary, r.passed()))
}
