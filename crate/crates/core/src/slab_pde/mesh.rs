use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Uniform spatial mesh `center ± radius` with step `dx` in each of `dim ∈ {1, 2}` axes.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabMesh {
    pub dim: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub dx: f64,
    /// Largest time step; a slab of length `τ` uses `⌈τ/dt⌉` equal steps.
    pub dt: f64,
}

impl SlabMesh {
    pub fn new(center: Vec<f64>, radius: f64, dx: f64, dt: f64) -> Result<Self> {
        let dim = center.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Dim(format!("finite differences need d ∈ {{1, 2}}, got {dim}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Config {
                field: "dx".into(),
                msg: format!("must be positive, got {dx}"),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config {
                field: "dt".into(),
                msg: format!("must be positive, got {dt}"),
            });
        }
        let ratio = radius / dx;
        if !(radius > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config {
                field: "radius".into(),
                msg: format!("radius {radius} must be a positive multiple of dx {dx}"),
            });
        }
        Ok(SlabMesh {
            dim,
            center,
            radius,
            dx,
            dt,
        })
    }

    /// Radius rounded up to a multiple of `dx`.
    pub fn snap_radius(radius: f64, dx: f64) -> f64 {
        (radius / dx - 1e-9).ceil() * dx
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        2 * (self.radius / self.dx).round() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.center[axis] - self.radius + k as f64 * self.dx
    }

    /// Coordinates of node `idx` (row-major, axis 0 slowest).
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let m = self.side();
        match self.dim {
            1 => vec![self.coord(0, idx)],
            _ => vec![self.coord(0, idx / m), self.coord(1, idx % m)],
        }
    }

    pub fn nodes_1d(&self) -> Vec<f64> {
        (0..self.side()).map(|k| self.coord(0, k)).collect()
    }

    pub fn same_nodes(&self, other: &SlabMesh) -> bool {
        self.dim == other.dim
            && self.side() == other.side()
            && self
                .center
                .iter()
                .zip(&other.center)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            && (self.dx - other.dx).abs() <= 1e-15 * self.dx.max(1.0)
    }
}

/// Mesh values of one slab solution at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub mesh: SlabMesh,
    pub time: f64,
    pub values: Vec<f64>,
}

/// Linear weights of `x` on a uniform axis with `m` nodes, extrapolating linearly outside.
fn axis_weights(lo: f64, dx: f64, m: usize, x: f64) -> (usize, f64) {
    let u = (x - lo) / dx;
    let k = (u.floor().max(0.0) as usize).min(m.saturating_sub(2));
    (k, u - k as f64)
}

impl ValueField {
    pub fn from_fn(mesh: SlabMesh, time: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..mesh.len()).map(|k| f(&mesh.node(k))).collect();
        ValueField { mesh, time, values }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Backend(format!("non-finite value in field at t = {}", self.time)))
        }
    }

    /// Linear (bilinear) interpolation; linear extrapolation outside the mesh.
    pub fn interp(&self, x: &[f64]) -> f64 {
        let m = self.mesh.side();
        let dx = self.mesh.dx;
        match self.mesh.dim {
            1 => {
                if m == 1 {
                    return self.values[0];
                }
                let (k, w) = axis_weights(self.mesh.coord(0, 0), dx, m, x[0]);
                (1.0 - w) * self.values[k] + w * self.values[k + 1]
            }
            _ => {
                let (i, wi) = axis_weights(self.mesh.coord(0, 0), dx, m, x[0]);
                let (j, wj) = axis_weights(self.mesh.coord(1, 0), dx, m, x[1]);
                let v = |a: usize, b: usize| self.values[a * m + b];
                (1.0 - wi) * ((1.0 - wj) * v(i, j) + wj * v(i, j + 1))
                    + wi * ((1.0 - wj) * v(i + 1, j) + wj * v(i + 1, j + 1))
            }
        }
    }

    /// `max |v| / (1 + ‖key‖ + |x|)` over the nodes.
    pub fn growth_ratio(&self, key_norm: f64) -> f64 {
        (0..self.values.len())
            .map(|k| {
                let x = self.mesh.node(k);
                let nx = x.iter().map(|c| c * c).sum::<f64>().sqrt();
                self.values[k].abs() / (1.0 + key_norm + nx)
            })
            .fold(0.0, f64::max)
    }

    /// Text dump: `# t: <time>` then one `x_1, ..., x_d, value` row per node.
    pub fn dump(&self) -> String {
        let mut s = format!("# t: {}\n", self.time);
        for k in 0..self.values.len() {
            for c in self.mesh.node(k) {
                let _ = write!(s, "{c}, ");
            }
            let _ = writeln!(s, "{}", self.values[k]);
        }
        s
    }
}
