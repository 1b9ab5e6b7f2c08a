use std::sync::Arc;

use ppde::fbsde_mc::*;
use ppde::generators::builtin::*;
use ppde::generators::terminal::*;
use ppde::generators::*;
use ppde::slab_pde::{solve_vn_lift, FdConfig};
use ppde::timegrid_paths::*;
use ppde::Error;

fn lebesgue() -> AtomicMeasure {
    AtomicMeasure::lebesgue(0.0, 1.0).unwrap()
}

fn constant(v: f64) -> Path {
    Path::constant(1.0, &[v], PathMode::CadlagPC).unwrap()
}

fn dyadic(n: usize) -> TimeGrid {
    GridSequence::dyadic(1.0).unwrap().level(n).unwrap()
}

fn const_driver(c: f64) -> McDriver {
    Arc::new(move |_, _, _, _| c)
}

#[test]
fn zero_dynamics_stay_put() {
    let x = Path::scalar_pc(1.0, vec![0.0, 0.2], vec![3.0, -1.5]).unwrap();
    let cfg = McConfig::default().with_samples(10);
    let b = simulate_frozen_sde(&zero(1), &Control::Branch(0), &dyadic(2), (0.3, &x), &cfg).unwrap();
    for m in 0..10 {
        for k in 0..=b.steps() {
            assert_eq!(b.x(m, k), &[-1.5]);
        }
        // grid points before t come from the start path
        assert_eq!(b.key(m), &[3.0, -1.5, -1.5, -1.5, -1.5]);
    }
}

#[test]
fn brownian_moments() {
    let m = 20_000;
    let cfg = McConfig::default().with_samples(m).with_seed(5);
    let b = simulate_frozen_sde(&heat(1, 1.0), &Control::Branch(0), &dyadic(2), (0.0, &constant(0.0)), &cfg).unwrap();
    let xt: Vec<f64> = (0..m).map(|i| b.terminal_x(i)[0]).collect();
    let mean = xt.iter().sum::<f64>() / m as f64;
    let var = xt.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    assert!(mean.abs() <= 3.0 / (m as f64).sqrt());
    assert!((var - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn frozen_feedback_euler_step() {
    // μ(r, x) = x_{η(r)}, σ = 0, one step on {0, 1}
    let features = PathFeatures::Custom {
        len: 1,
        f: Arc::new(|t, x| vec![x.value1(t)]),
    };
    let branch = Branch {
        control: vec![0.0],
        sigma: Arc::new(|_, _| vec![0.0]),
        drift: Arc::new(|_, phi| vec![phi[0]]),
        discount: Arc::new(|_, _| 0.0),
        driver: None,
        sensitivities: None,
    };
    let f = GeneratorSpec::from_branches("feedback", 1, features, vec![branch], 1.0);
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let cfg = McConfig::default().with_samples(2).with_substeps(1);
    let b = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &constant(1.0)), &cfg).unwrap();
    assert_eq!(b.terminal_x(0), &[2.0]);
    // with more substeps the drift still reads x_0, so the path is still 1 + t
    let cfg = cfg.with_substeps(4);
    let b = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &constant(1.0)), &cfg).unwrap();
    assert!((b.terminal_x(1)[0] - 2.0).abs() < 1e-15);
}

#[test]
fn coefficients_never_read_future_increments() {
    let f = semilinear(SemilinearParams::default());
    let grid = dyadic(2);
    let cfg = McConfig::default().with_samples(8).with_substeps(2);
    let a = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &constant(0.2)), &cfg).unwrap();
    let cut = 3;
    let steps = a.steps();
    let mut dw = a.increments().to_vec();
    for m in 0..8 {
        for k in cut..steps {
            dw[m * steps + k] += 0.5 + m as f64;
        }
    }
    let b = simulate_with_increments(&f, &Control::Branch(0), &grid, (0.0, &constant(0.2)), dw, &cfg).unwrap();
    for m in 0..8 {
        for k in 0..=cut {
            assert_eq!(a.x(m, k), b.x(m, k));
            assert_eq!(a.phi(m, k), b.phi(m, k));
        }
        assert_ne!(a.terminal_x(m), b.terminal_x(m));
    }
}

#[test]
fn seeding_is_reproducible() {
    let f = heat(1, 1.0);
    let grid = dyadic(1);
    let cfg = McConfig::default().with_samples(64).with_seed(9);
    let a = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &constant(0.0)), &cfg).unwrap();
    let b = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &constant(0.0)), &cfg).unwrap();
    assert_eq!(a.increments(), b.increments());
    let c = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &constant(0.0)), &cfg.clone().with_seed(10)).unwrap();
    assert_ne!(a.increments(), c.increments());
    // antithetic partners
    assert_eq!(a.dw(0, 0)[0], -a.dw(1, 0)[0]);
}

#[test]
fn bsde_closed_forms() {
    let grid = dyadic(2);
    let cfg = McConfig::default().with_samples(20_000).with_substeps(16);
    let heat1 = heat(1, 1.0);
    let b = simulate_frozen_sde(&heat1, &Control::Branch(0), &grid, (0.0, &constant(0.0)), &cfg).unwrap();
    let xt: Vec<f64> = (0..b.samples).map(|m| b.terminal_x(m)[0]).collect();
    let mart = solve_bsde_regression(&const_driver(0.0), &xt, &b, &cfg).unwrap();
    assert!(mart.y.abs() <= 3.0 * mart.se + 1e-12, "{mart:?}");
    assert!((mart.z[0] - 1.0).abs() < 0.05);

    let ode = solve_bsde_regression(&const_driver(1.0), &vec![0.0; b.samples], &b, &cfg).unwrap();
    assert!((ode.y - 1.0).abs() < 1e-12);

    let r = 0.5;
    let disc: McDriver = Arc::new(move |_, _, y, _| -r * y);
    let est = solve_bsde_regression(&disc, &vec![1.0; b.samples], &b, &cfg).unwrap();
    assert!((est.y - (-r * 1.0f64).exp()).abs() < 5e-3, "{}", est.y);
}

#[test]
fn rank_deficiency_is_reported() {
    let f = semilinear(SemilinearParams::default());
    let cfg = McConfig::default().with_samples(4);
    let b = simulate_frozen_sde(&f, &Control::Branch(0), &dyadic(1), (0.0, &constant(0.0)), &cfg).unwrap();
    let err = solve_bsde_regression(&const_driver(0.0), &[0.0; 4], &b, &cfg).unwrap_err();
    assert!(matches!(err, Error::RankDeficient { .. }));
}

#[test]
fn monomials_of_degree_two() {
    let e = monomial_exponents(2, 2);
    assert_eq!(e.len(), 6);
    assert_eq!(monomial_exponents(3, 2).len(), 10);
    assert_eq!(e[0], vec![0, 0]);
}

#[test]
fn hjb_single_branch_reduces_to_bsde() {
    let grid = dyadic(1);
    let cfg = McConfig::default().with_samples(4000);
    let h = hjb_value_mc(&heat(1, 1.0), &square(), &grid, (0.0, &constant(1.0)), &cfg).unwrap();
    assert_eq!(h.method, HjbMethod::Single);
    assert!((h.value - 2.0).abs() < 3.0 * h.se + 1e-2, "{h:?}");
}

#[test]
fn hjb_bsb_exhaustive_two_slabs() {
    let grid = dyadic(1);
    let cfg = McConfig::default().with_samples(20_000);
    let h = hjb_value_mc(&bsb(&[0.1, 0.2]), &square(), &grid, (0.0, &constant(1.0)), &cfg).unwrap();
    assert_eq!(
        h.method,
        HjbMethod::Exhaustive {
            assignments: 4,
            best: vec![1, 1]
        }
    );
    assert!((h.value - 1.04).abs() < 3.0 * h.se + 1e-2, "{h:?}");
}

#[test]
fn hjb_driver_sup_for_controlled_drift() {
    let grid = dyadic(2);
    // the pair-mean se misses the Z regression error, which decays like 1/sqrt(M)
    let cfg = McConfig::default().with_samples(64_000);
    let h = hjb_value_mc(&controlled_drift(&[-1.0, 1.0], 1.0), &linear(), &grid, (0.0, &constant(0.3)), &cfg).unwrap();
    assert_eq!(h.method, HjbMethod::DriverSup);
    assert!((h.value - 1.3).abs() < 3.0 * h.se + 1e-2, "{h:?}");
}

#[test]
fn hjb_over_budget_is_an_error() {
    let grid = dyadic(4);
    let cfg = McConfig::default().with_samples(100);
    let err = hjb_value_mc(&bsb(&[0.1, 0.2]), &square(), &grid, (0.0, &constant(1.0)), &cfg).unwrap_err();
    assert!(matches!(err, Error::ControlBudget { assignments: 65536, budget: 256 }));
    assert!(err.to_string().contains("slab PDE"));
}

#[test]
fn tangent_closed_forms() {
    let grid = dyadic(2);
    let cfg = McConfig::default().with_samples(2000);
    let t = 0.3;
    let x = constant(0.5);
    let a = tangent_fbsde(&heat(1, 1.0), &linear(), &grid, (t, &x), None, &cfg).unwrap();
    assert!((a.grad - 1.0).abs() < 1e-12);
    // λ = Lebesgue: PC projection weighs grid points from the slab of t on
    let b = tangent_fbsde(&heat(1, 1.0), &running_integral(1.0), &grid, (t, &x), None, &cfg).unwrap();
    let projected = 1.0 - 0.5;
    assert!((b.grad - projected).abs() < 1e-12, "{}", b.grad);
    let c = tangent_fbsde(
        &heat(1, 1.0),
        &running_integral(1.0),
        &grid,
        (t, &x),
        None,
        &cfg.clone().with_mode(PathMode::ContinuousPL),
    )
    .unwrap();
    // hat weights: the point t_1 = 0.25 < t is frozen, so 1 − 0.25 − 0.125
    assert!((c.grad - 0.625).abs() < 1e-12, "{}", c.grad);
}

#[test]
fn tangent_needs_metadata() {
    let grid = dyadic(1);
    let cfg = McConfig::default().with_samples(100);
    let err = tangent_fbsde(&heat(1, 1.0), &product(0.5), &grid, (0.0, &constant(0.0)), None, &cfg).unwrap_err();
    assert!(matches!(err, Error::Metadata(_)));
}

#[test]
fn tangent_matches_bump_to_first_order() {
    let f = semilinear(SemilinearParams::default());
    let g = sin_integral_plus_terminal(lebesgue(), 0.5, 1.0);
    let grid = dyadic(2);
    let cfg = McConfig::default().with_samples(4000).with_basis_measure(lebesgue());
    let x = Path::scalar_pc(1.0, vec![0.0, 0.25], vec![0.2, -0.3]).unwrap();
    let q = (0.4, &x);
    let tan = tangent_fbsde(&f, &g, &grid, q, None, &cfg).unwrap();
    let gaps: Vec<f64> = [1e-3, 5e-4]
        .iter()
        .map(|&d| (bump_derivative(&f, &g, &grid, q, d, &cfg).unwrap().derivative - tan.grad).abs())
        .collect();
    assert!(gaps[0] / tan.grad.abs() < 5e-2);
    let ratio = gaps[0] / gaps[1];
    assert!((ratio - 2.0).abs() < 0.6, "{gaps:?}");
}

#[test]
fn mc_agrees_with_lift() {
    let f = linear_path(LinearPathParams::default());
    let g = square();
    let grid = dyadic(1);
    let x = constant(0.4);
    let cfg = McConfig::default().with_samples(40_000).with_substeps(32);
    let mc = hjb_value_mc(&f, &g, &grid, (0.0, &x), &cfg).unwrap();
    let fd = solve_vn_lift(&f, &g, &grid, (0.0, &x), &FdConfig::default().with_dx(0.025)).unwrap();
    assert!((mc.value - fd.value).abs() < 3.0 * mc.se + 1e-2, "{} ± {} vs {}", mc.value, mc.se, fd.value);
}

#[test]
fn second_moments_stable_under_doubling() {
    let f = semilinear(SemilinearParams::default());
    let grid = dyadic(2);
    let x = constant(0.5);
    let m2 = |m: usize| {
        let cfg = McConfig::default().with_samples(m);
        let b = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (0.0, &x), &cfg).unwrap();
        (0..m)
            .map(|i| (0..=b.steps()).map(|k| b.x(i, k)[0].powi(2)).fold(0.0, f64::max))
            .sum::<f64>()
            / m as f64
    };
    let (a, b) = (m2(4000), m2(8000));
    assert!(a.is_finite() && (a - b).abs() / a < 0.05, "{a} {b}");
}

#[test]
fn flow_is_lipschitz_in_the_history() {
    // E|X_T − X'_T| ≤ C ∫|x − x'| dλ for perturbations of the past
    let f = semilinear(SemilinearParams::default());
    let grid = dyadic(3);
    let cfg = McConfig::default().with_samples(2000);
    let t = 0.5;
    let base = Path::scalar_pc(1.0, vec![0.0], vec![0.1]).unwrap();
    let b0 = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (t, &base), &cfg).unwrap();
    let ratios: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let x = Path::scalar_pc(1.0, vec![0.0, 0.25, 0.5], vec![0.1 + eps, 0.1, 0.1]).unwrap();
            let b1 = simulate_frozen_sde(&f, &Control::Branch(0), &grid, (t, &x), &cfg).unwrap();
            let diff = (0..cfg.samples)
                .map(|m| (b1.terminal_x(m)[0] - b0.terminal_x(m)[0]).abs())
                .sum::<f64>()
                / cfg.samples as f64;
            diff / (eps * 0.25)
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi < 2.0 && hi <= 1.5 * lo, "{ratios:?}");
}
