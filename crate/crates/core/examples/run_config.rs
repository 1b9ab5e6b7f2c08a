//! Drives the experiment runner from a TOML config, as the `ppde` binary does.
//!
//! cargo run --example run_config -- configs/heat_running_integral.toml converge

use std::path::PathBuf;

use ppde::cli::{render_table, run, Command, ExperimentConfig};

fn main() -> ppde::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/configs/heat_running_integral.toml").to_string()
    }));
    let cmd = match args.next().as_deref().unwrap_or("converge") {
        "solve" => Command::Solve { dump_field: false },
        "gridcheck" => Command::Gridcheck,
        "modulus" => Command::Modulus,
        "classical" => Command::Classical,
        _ => Command::Converge,
    };
    let cfg = ExperimentConfig::load(&path)?;
    let out = run(cmd, &cfg)?;
    for a in &out.artifacts {
        print!("{}", render_table(&a.contents));
    }
    for line in &out.summary {
        println!("{line}");
    }
    println!("passed: {}", out.passed);
    Ok(())
}
