//! Vertical derivatives, smoothing certificates and the transfer-coefficient probe.
//!
//! cargo run --example dupire

use ppde::dupire::*;
use ppde::generators::builtin::heat;
use ppde::generators::terminal::*;
use ppde::slab_pde::{solve_vn_lift, FdConfig};
use ppde::timegrid_paths::*;
use ppde::Result;

fn main() -> Result<()> {
    let lam = AtomicMeasure::lebesgue(0.0, 1.0)?.with_atom(0.5, 1.0)?;
    let grid = GridSequence::dyadic(1.0)?.level(4)?;
    let cfg = FdConfig::default().with_dx(0.05).with_radius(6.0);
    let g = integral(lam.clone());
    let u = |t: f64, x: &Path| -> Result<f64> { Ok(solve_vn_lift(&heat(1, 1.0), &g, &grid, (t, x), &cfg)?.value) };
    let x = Path::constant(1.0, &[0.2], PathMode::CadlagPC)?;
    for t in [0.25, 0.49, 0.51, 0.75] {
        let d = vertical_derivative(&u, t, &x, 1e-2, BumpKind::Tail)?;
        println!("∇u({t}) = {:.4}  (limit λ([t, 1]) = {:.4}, level 4 grid)", d.value[0], lam.mass(t, 1.0, Ends::Closed));
    }

    let huber = huber_integral(AtomicMeasure::lebesgue(0.0, 1.0)?);
    let coarse = GridSequence::dyadic(1.0)?.level(2)?;
    let s = smooth_terminal(&huber, &coarse, PathMode::CadlagPC, DEFAULT_BANDWIDTH, Some(1.0), 32, 1)?;
    println!("smoothing certificates: {} rows, all pass {}", s.certificates.len(), s.passed());

    for (name, g) in [("huber(∫x)", huber), ("x_t1·x_T", product(1.0 / 3.0))] {
        let grid = TimeGrid::uniform(1.0, 3)?;
        let p = structure_condition_probe(&g, &grid, 16, 2)?;
        let status: Vec<String> = p.pairs.iter().map(|q| format!("({},{}) {:?}", q.i, q.j, q.status)).collect();
        println!("{name}: {}", status.join(", "));
    }
    Ok(())
}
