//! Regression Monte Carlo: HJB value over a finite control set and the tangent system.
//!
//! cargo run --example monte_carlo

use ppde::fbsde_mc::*;
use ppde::generators::builtin::*;
use ppde::generators::terminal::*;
use ppde::timegrid_paths::*;

fn main() -> ppde::Result<()> {
    let grid = GridSequence::dyadic(1.0)?.level(2)?;
    let one = Path::constant(1.0, &[1.0], PathMode::CadlagPC)?;
    let cfg = McConfig::default().with_samples(20_000).with_seed(7);

    let est = hjb_value_mc(&bsb(&[0.1, 0.2]), &square(), &grid, (0.0, &one), &cfg)?;
    println!("BSB value {:.5} ± {:.1e} via {:?} (exact 1.04)", est.value, est.se, est.method);

    let f = semilinear(SemilinearParams::default());
    let g = sin_integral_plus_terminal(AtomicMeasure::lebesgue(0.0, 1.0)?, 0.5, 1.0);
    let x = Path::constant(1.0, &[0.3], PathMode::CadlagPC)?;
    let tan = tangent_fbsde(&f, &g, &grid, (0.0, &x), None, &cfg)?;
    let bump = bump_derivative(&f, &g, &grid, (0.0, &x), 1e-3, &cfg)?;
    println!("semilinear value {:.5} ± {:.1e}", tan.value, tan.value_se);
    println!("vertical derivative: tangent {:.5}, bump {:.5}", tan.grad, bump.derivative);

    let r = martingale_residual(&f, &g, &grid, (0.0, &x), &cfg, 10_000, 99)?;
    println!(
        "out-of-sample residual {:.2e} ± {:.1e}, relative covariation {:.2e}",
        r.mean,
        r.se,
        r.relative_covariation()
    );
    Ok(())
}
