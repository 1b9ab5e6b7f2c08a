use super::measure::AtomicMeasure;
use super::path::Path;
use crate::error::{Error, Result};

fn check_pair(x: &Path, xp: &Path) -> Result<()> {
    if x.dim() != xp.dim() {
        return Err(Error::Dim(format!("paths of dimension {} and {}", x.dim(), xp.dim())));
    }
    if (x.horizon() - xp.horizon()).abs() > x.tol() {
        return Err(Error::Path("paths have different horizons".into()));
    }
    Ok(())
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// `ρ_t(x, x') = ‖x_{t∧} - x'_{t∧}‖`, exact on the merged breakpoints.
pub fn dist_uniform(x: &Path, xp: &Path, t: f64) -> Result<f64> {
    check_pair(x, xp)?;
    let t = t.clamp(0.0, x.horizon());
    let tol = x.tol();
    let mut pts: Vec<f64> = x
        .breakpoints()
        .iter()
        .chain(xp.breakpoints())
        .copied()
        .filter(|&s| s < t - tol)
        .collect();
    pts.push(t);
    let mut best: f64 = 0.0;
    for &s in &pts {
        best = best.max(diff_norm(&x.value(s), &xp.value(s)));
        if s > tol {
            best = best.max(diff_norm(&x.left_limit(s), &xp.left_limit(s)));
        }
    }
    Ok(best)
}

/// Jump times in `(0, t]` and the values before/after, from a stopped PC path.
fn jump_events(x: &Path, t: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let tol = x.tol();
    let mut times = Vec::new();
    let mut values = vec![x.value(0.0)];
    for &b in x.breakpoints().iter().skip(1) {
        if b > t + tol {
            break;
        }
        let v = x.value(b);
        if diff_norm(&v, values.last().unwrap()) > 0.0 {
            times.push(b);
            values.push(v);
        }
    }
    (times, values)
}

fn dist_to_interval(s: f64, lo: f64, hi: f64) -> f64 {
    if s < lo {
        lo - s
    } else if s > hi {
        s - hi
    } else {
        0.0
    }
}

/// Skorokhod-type distance: `inf_λ (‖λ - I‖ + ‖x_{t∧} - (x'∘λ)_{t∧}‖) + ∫_0^t |x - x'| dμ`.
///
/// Alignments of the two jump sequences are monotone lattice paths. A step
/// `(i-1,j) → (i,j)` places the `i`-th jump of `x` between jumps `j` and `j+1` of
/// `x'` and forces the time displacement of that placement; diagonal steps match
/// jumps. For every candidate displacement budget `D` a minimax pass finds the
/// smallest value gap `G(D)`; the result is `min_D D + G(D)`.
pub fn dist_skorokhod(x: &Path, xp: &Path, t: f64, mu: &AtomicMeasure) -> Result<f64> {
    check_pair(x, xp)?;
    if !x.is_piecewise_constant() || !xp.is_piecewise_constant() {
        return Err(Error::Mode("Skorokhod distance needs piecewise-constant paths".into()));
    }
    let t = t.clamp(0.0, x.horizon());
    let (ta, va) = jump_events(x, t);
    let (tb, vb) = jump_events(xp, t);
    let (p, q) = (ta.len(), tb.len());
    let edge_a = |k: usize| if k == 0 { 0.0 } else if k <= p { ta[k - 1] } else { t };
    let edge_b = |k: usize| if k == 0 { 0.0 } else if k <= q { tb[k - 1] } else { t };
    let disp_a = |i: usize, j: usize| dist_to_interval(ta[i - 1], edge_b(j), edge_b(j + 1));
    let disp_b = |i: usize, j: usize| dist_to_interval(tb[j - 1], edge_a(i), edge_a(i + 1));
    let disp_m = |i: usize, j: usize| (ta[i - 1] - tb[j - 1]).abs();

    let mut budgets = vec![0.0];
    for i in 0..=p {
        for j in 0..=q {
            if i > 0 {
                budgets.push(disp_a(i, j));
            }
            if j > 0 {
                budgets.push(disp_b(i, j));
            }
            if i > 0 && j > 0 {
                budgets.push(disp_m(i, j));
            }
        }
    }
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();

    let gaps: Vec<Vec<f64>> = va
        .iter()
        .map(|a| vb.iter().map(|b| diff_norm(a, b)).collect())
        .collect();
    let mut best = f64::INFINITY;
    let mut cost = vec![vec![f64::INFINITY; q + 1]; p + 1];
    for &budget in &budgets {
        if budget >= best {
            break;
        }
        for i in 0..=p {
            for j in 0..=q {
                let mut c = if i == 0 && j == 0 { 0.0 } else { f64::INFINITY };
                if i > 0 && disp_a(i, j) <= budget {
                    c = c.min(cost[i - 1][j]);
                }
                if j > 0 && disp_b(i, j) <= budget {
                    c = c.min(cost[i][j - 1]);
                }
                if i > 0 && j > 0 && disp_m(i, j) <= budget {
                    c = c.min(cost[i - 1][j - 1]);
                }
                cost[i][j] = c.max(gaps[i][j]);
            }
        }
        best = best.min(budget + cost[p][q]);
    }
    let integral = if mu.is_zero() {
        0.0
    } else {
        mu.integrate_abs_diff(&x.stopped(t), &xp.stopped(t), t)
    };
    Ok(best + integral)
}

/// `‖x_{t∧} - x'_{t∧}‖` paired with the μ-weighted upper bound of the sandwich.
pub fn sandwich_upper(x: &Path, xp: &Path, t: f64, mu: &AtomicMeasure) -> Result<f64> {
    let u = dist_uniform(x, xp, t)?;
    Ok((1.0 + mu.mass(0.0, t, super::measure::Ends::Closed)) * u)
}
