use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppde::cli::{output_dir, render_table, run, write_outputs, Command, ExperimentConfig};
use ppde::Error;

#[derive(Parser)]
#[command(name = "ppde", version, about = "Run path-dependent PDE experiments from a TOML config")]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory (overrides PPDE_OUTPUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Values at every level.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the lift fields of the first query at the finest level.
        #[arg(long)]
        dump_field: bool,
    },
    /// Convergence table, rate fit and limit.
    Converge(Common),
    /// Limits on two grid sequences.
    Gridcheck(Common),
    /// Space and time modulus ladders.
    Modulus(Common),
    /// Limits along a perturbed family.
    Stability(Common),
    /// Gaps to a known classical solution.
    Classical(Common),
    /// Monte Carlo values at every level.
    Mc(Common),
    /// Vertical derivatives and the transfer coefficient probe.
    Dupire(Common),
    /// Sampled structural checks of the generator.
    Validate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.cmd {
        Sub::Solve { common, dump_field } => (Command::Solve { dump_field }, common),
        Sub::Converge(c) => (Command::Converge, c),
        Sub::Gridcheck(c) => (Command::Gridcheck, c),
        Sub::Modulus(c) => (Command::Modulus, c),
        Sub::Stability(c) => (Command::Stability, c),
        Sub::Classical(c) => (Command::Classical, c),
        Sub::Mc(c) => (Command::Mc, c),
        Sub::Dupire(c) => (Command::Dupire, c),
        Sub::Validate(c) => (Command::Validate, c),
    };
    match execute(cmd, &common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Parse { .. } | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn execute(cmd: Command, common: &Common) -> ppde::Result<bool> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::config("config", format!("{}: {e}", common.config.display())))?;
    let dir = common.config.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    let mut cfg = ExperimentConfig::parse(&text, &dir)?;
    if let Some(j) = common.jobs {
        cfg.jobs = j.max(1);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Backend(e.to_string()))?;
    let outcome = pool.install(|| run(cmd, &cfg))?;
    let out = output_dir(&cfg, common.out.as_deref());
    let manifest = write_outputs(&outcome, &cfg, &text, &out)?;
    for a in &outcome.artifacts {
        if a.name.ends_with(".csv") {
            println!("== {} ({} rows)", a.name, a.rows);
            print!("{}", render_table(&a.contents));
        }
    }
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("{}: {}", outcome.command, if outcome.passed { "ok" } else { "FLAGGED" });
    println!("manifest: {}", manifest.display());
    Ok(outcome.passed)
}
