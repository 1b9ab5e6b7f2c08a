//! Plain-text path and grid literals.
//!
//! ```text
//! # mode: pc          (pc = càdlàg piecewise constant, pl = continuous piecewise linear)
//! # horizon: 1.0
//! 0.0, 1.0
//! 0.5, 2.0
//! ```
//!
//! One breakpoint per line: time, then the `d` coordinates. Grids use the same
//! layout with a single column of times and no mode line.

use super::grid::TimeGrid;
use super::path::{Path, PathMode};
use crate::error::{Error, Result};

struct Parsed {
    mode: Option<PathMode>,
    horizon: Option<f64>,
    rows: Vec<Vec<f64>>,
}

fn parse_rows(text: &str) -> Result<Parsed> {
    let mut out = Parsed {
        mode: None,
        horizon: None,
        rows: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let Some((key, value)) = rest.split_once(':') else { continue };
            let value = value.trim();
            match key.trim() {
                "mode" => {
                    out.mode = Some(match value {
                        "pc" | "cadlag" => PathMode::CadlagPC,
                        "pl" | "continuous" => PathMode::ContinuousPL,
                        other => {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!("unknown mode `{other}`"),
                            })
                        }
                    })
                }
                "horizon" => {
                    out.horizon = Some(value.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad horizon `{value}`"),
                    })?)
                }
                _ => {}
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        if let Some(first) = out.rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        out.rows.push(row);
    }
    Ok(out)
}

pub fn parse_path(text: &str) -> Result<Path> {
    let p = parse_rows(text)?;
    let mode = p.mode.ok_or(Error::Parse {
        line: 0,
        msg: "missing `# mode:` header".into(),
    })?;
    let horizon = p.horizon.ok_or(Error::Parse {
        line: 0,
        msg: "missing `# horizon:` header".into(),
    })?;
    if p.rows.is_empty() || p.rows[0].len() < 2 {
        return Err(Error::Parse {
            line: 0,
            msg: "need at least one row `time, value...`".into(),
        });
    }
    let times = p.rows.iter().map(|r| r[0]).collect();
    let values = p.rows.iter().map(|r| r[1..].to_vec()).collect();
    match mode {
        PathMode::CadlagPC => Path::piecewise_constant(horizon, times, values),
        PathMode::ContinuousPL => Path::piecewise_linear(horizon, times, values),
    }
}

pub fn write_path(x: &Path) -> Result<String> {
    let mode = match x.mode() {
        PathMode::CadlagPC if x.is_piecewise_constant() => "pc",
        PathMode::ContinuousPL => "pl",
        PathMode::CadlagPC => {
            return Err(Error::Unsupported(
                "only pure piecewise-constant or piecewise-linear paths have a literal form".into(),
            ))
        }
    };
    let mut s = format!("# mode: {mode}\n# horizon: {}\n", x.horizon());
    for (k, &b) in x.breakpoints().iter().enumerate() {
        let vals: Vec<String> = x.segment_start(k).iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{b}, {}\n", vals.join(", ")));
    }
    Ok(s)
}

pub fn parse_grid(text: &str) -> Result<TimeGrid> {
    let p = parse_rows(text)?;
    if p.rows.iter().any(|r| r.len() != 1) {
        return Err(Error::Parse {
            line: 0,
            msg: "grid literal has one time per line".into(),
        });
    }
    let grid = TimeGrid::new(p.rows.iter().map(|r| r[0]).collect())?;
    if let Some(h) = p.horizon {
        if (h - grid.horizon()).abs() > grid.tol() {
            return Err(Error::Grid(format!(
                "declared horizon {h} differs from the last point {}",
                grid.horizon()
            )));
        }
    }
    Ok(grid)
}

pub fn write_grid(grid: &TimeGrid) -> String {
    let mut s = format!("# horizon: {}\n", grid.horizon());
    for p in grid.points() {
        s.push_str(&format!("{p}\n"));
    }
    s
}
