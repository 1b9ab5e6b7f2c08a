//! Time grids, piecewise paths, the projections `Π_t`, concatenation and the
//! path metrics.

mod grid;
pub mod io;
mod measure;
mod metric;
mod path;

pub use grid::{GridSequence, TimeGrid, TIME_RTOL};
pub use measure::{AtomicMeasure, Density, Ends};
pub use metric::{dist_skorokhod, dist_uniform, sandwich_upper};
pub use path::{concat, grid_values, project, project_full, Path, PathMode};

/// `η(t)` on `grid`.
pub fn eta(grid: &TimeGrid, t: f64) -> crate::Result<f64> {
    grid.eta(t)
}

/// `η⁺(t)` on `grid`, with `η⁺(0) = 0`.
pub fn eta_plus(grid: &TimeGrid, t: f64) -> crate::Result<f64> {
    grid.eta_plus(t)
}
