//! Grids, projections and path distances.
//!
//! cargo run --example paths_and_grids

use ppde::approximation::fixtures::fixture;
use ppde::timegrid_paths::io::write_path;
use ppde::timegrid_paths::*;

fn main() -> ppde::Result<()> {
    let dyadic = GridSequence::dyadic(1.0)?;
    let triadic = GridSequence::triadic(1.0)?;
    for n in 1..=3 {
        let (a, b) = (dyadic.level(n)?, triadic.level(n)?);
        println!("level {n}: dyadic mesh {:.4} ({} slabs), triadic mesh {:.4} ({} slabs)", a.mesh(), a.n(), b.mesh(), b.n());
    }

    let sine = fixture("sine")?;
    let grid = dyadic.level(2)?;
    let t = 0.6;
    println!("eta({t}) = {}, eta+({t}) = {}", eta(&grid, t)?, eta_plus(&grid, t)?);

    // piecewise-constant freezing of the sine fixture on the level-2 grid
    let frozen = project(&grid, &sine, t)?;
    println!("{}", write_path(&frozen)?);

    let lam = AtomicMeasure::lebesgue(0.0, 1.0)?.with_atom(0.5, 1.0)?;
    let ramp = fixture("ramp")?;
    println!("sup distance up to {t}: {:.4}", dist_uniform(&sine, &ramp, t)?);
    // jump at 0.3 vs jump at 0.35: close in the Skorokhod sense, far in sup
    let a = Path::piecewise_constant(1.0, vec![0.0, 0.3], vec![vec![0.0], vec![1.0]])?;
    let b = Path::piecewise_constant(1.0, vec![0.0, 0.35], vec![vec![0.0], vec![1.0]])?;
    println!("step paths: sup {:.4}, Skorokhod-type {:.4}", dist_uniform(&a, &b, t)?, dist_skorokhod(&a, &b, t, &lam)?);
    println!("∫ sine dλ up to {t}: {:.4}", lam.integrate_upto(&sine, t)[0]);
    Ok(())
}
