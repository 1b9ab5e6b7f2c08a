//! Slab PDE solves: the Markovian lift against the nested solver and a closed form.
//!
//! cargo run --example lift_solver

use ppde::generators::builtin::heat;
use ppde::generators::terminal::integral_squared;
use ppde::slab_pde::{solve_vn_exact, solve_vn_lift, FdConfig};
use ppde::timegrid_paths::*;

fn main() -> ppde::Result<()> {
    let f = heat(1, 1.0);
    let g = integral_squared(AtomicMeasure::lebesgue(0.0, 1.0)?);
    let x = Path::constant(1.0, &[0.0], PathMode::CadlagPC)?;
    let cfg = FdConfig::default().with_dx(0.1).with_radius(6.0);
    println!("level  lift       exact      pc closed form");
    for n in 1..=4 {
        let grid = GridSequence::dyadic(1.0)?.level(n)?;
        let lift = solve_vn_lift(&f, &g, &grid, (0.0, &x), &cfg)?;
        let exact = if n <= 2 { format!("{:.6}", solve_vn_exact(&f, &g, &grid, (0.0, &x), &cfg)?) } else { "-".into() };
        let h = grid.mesh();
        println!("{n:>5}  {:.6}   {exact:<9}  {:.6}", lift.value, 1.0 / 3.0 - h / 2.0 + h * h / 6.0);
    }
    let pl = cfg.clone().with_mode(PathMode::ContinuousPL);
    let grid = GridSequence::dyadic(1.0)?.level(5)?;
    let v = solve_vn_lift(&f, &g, &grid, (0.0, &x), &pl)?.value;
    println!("continuous projection, level 5: {v:.6} (limit 1/3)");
    Ok(())
}
