//! Level sweep, rate fit, extrapolated limit and grid independence.
//!
//! cargo run --example convergence

use ppde::approximation::*;
use ppde::generators::builtin::heat;
use ppde::generators::terminal::integral_squared;
use ppde::slab_pde::FdConfig;
use ppde::timegrid_paths::*;

fn main() -> ppde::Result<()> {
    let f = heat(1, 1.0);
    let g = integral_squared(AtomicMeasure::lebesgue(0.0, 1.0)?);
    let x = Path::constant(1.0, &[0.0], PathMode::CadlagPC)?;
    let backend = Backend::Lift(FdConfig::default().with_dx(0.1).with_mode(PathMode::ContinuousPL));
    let cfg = ApproxConfig::default();
    let dyadic = GridSequence::dyadic(1.0)?;

    let r = approximate_solution(&f, &g, &dyadic, (0.0, &x), 1..=5, &backend, &cfg)?;
    print!("{}", write_csv(&r.csv_rows("zero"))?);
    println!("rate {:?}, limit {:.6}, gap bound {:.2e}", r.rate, r.limit, r.gap_bound);

    let triadic = GridSequence::triadic(1.0)?;
    let gi = grid_independence(&f, &g, (&dyadic, 1..=5), (&triadic, 1..=3), &[(0.0, x)], &backend, &cfg)?;
    println!("dyadic vs triadic: discrepancy {:.2e}, tol_grid {:.2e}, passed {}", gi.max_discrepancy, gi.tol_grid(), gi.passed());
    Ok(())
}
