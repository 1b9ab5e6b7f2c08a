use ppde::generators::builtin::*;
use ppde::generators::terminal::*;
use ppde::generators::*;
use ppde::slab_pde::*;
use ppde::timegrid_paths::*;
use ppde::Error;
use proptest::prelude::*;

fn g3() -> TimeGrid {
    TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap()
}

fn lebesgue() -> AtomicMeasure {
    AtomicMeasure::lebesgue(0.0, 1.0).unwrap()
}

fn zero_path() -> Path {
    Path::constant(1.0, &[0.0], PathMode::CadlagPC).unwrap()
}

fn slab_solve(f: &GeneratorSpec, dx: f64, radius: f64, tau: f64, scheme: Scheme, term: impl Fn(&[f64]) -> f64) -> ValueField {
    let grid = TimeGrid::new(vec![0.0, tau, 1.0]).unwrap();
    let key = FrozenKey::new(&grid, 0, f.dim, vec![0.0; f.dim]).unwrap();
    let fr = freeze(f, &grid, &key, PathMode::CadlagPC).unwrap();
    let lim = explicit_dt_limit(&fr, (0.0, tau), f.dim, dx).unwrap();
    let dt = if scheme == Scheme::Explicit { (0.9 * lim).min(tau) } else { dx };
    let mesh = SlabMesh::new(vec![0.0; f.dim], radius, dx, dt).unwrap();
    let terminal = ValueField::from_fn(mesh, tau, term);
    solve_slab(&fr, &terminal, (0.0, tau), scheme).unwrap()
}

fn interior_error(v: &ValueField, within: f64, exact: impl Fn(&[f64]) -> f64) -> f64 {
    (0..v.values.len())
        .map(|k| v.mesh.node(k))
        .enumerate()
        .filter(|(_, x)| x.iter().all(|c| c.abs() <= within))
        .map(|(k, x)| (v.values[k] - exact(&x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn heat_slab_on_square() {
    let tau = 0.5;
    let v = slab_solve(&heat(1, 1.0), 0.05, 6.0, tau, Scheme::Explicit, |x| x[0] * x[0]);
    assert!(interior_error(&v, 1.5, |x| x[0] * x[0] + tau) < 1e-6);
}

#[test]
fn zero_generator_keeps_the_terminal() {
    let v = slab_solve(&zero(1), 0.1, 2.0, 0.3, Scheme::Explicit, |x| x[0].sin());
    let mesh = v.mesh.clone();
    for (k, val) in v.values.iter().enumerate() {
        assert_eq!(*val, mesh.node(k)[0].sin());
    }
}

#[test]
fn bsb_slab_on_square_both_schemes() {
    let tau = 0.5;
    for scheme in [Scheme::Explicit, Scheme::ImplicitPolicy] {
        let v = slab_solve(&bsb(&[0.1, 0.2]), 0.05, 3.0, tau, scheme, |x| x[0] * x[0]);
        let err = interior_error(&v, 1.0, |x| x[0] * x[0] + 0.04 * tau);
        assert!(err < 1e-6, "{scheme:?}: {err}");
    }
}

#[test]
fn heat_slab_in_two_dimensions() {
    let tau = 0.25;
    let v = slab_solve(&heat(2, 1.0), 0.1, 4.0, tau, Scheme::Explicit, |x| x[0] * x[0] + x[1] * x[1]);
    assert!(interior_error(&v, 1.0, |x| x[0] * x[0] + x[1] * x[1] + 2.0 * tau) < 1e-6);
}

#[test]
fn cfl_violation_is_rejected() {
    let grid = g3();
    let f = heat(1, 1.0);
    let key = FrozenKey::new(&grid, 0, 1, vec![0.0]).unwrap();
    let fr = freeze(&f, &grid, &key, PathMode::CadlagPC).unwrap();
    let mesh = SlabMesh::new(vec![0.0], 1.0, 0.1, 0.05).unwrap();
    let terminal = ValueField::from_fn(mesh, 0.5, |x| x[0]);
    let err = solve_slab(&fr, &terminal, (0.0, 0.5), Scheme::Explicit).unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }));
    assert!(SlabMesh::new(vec![0.0], 1.03, 0.1, 0.01).is_err());
}

#[test]
fn mesh_refinement_halves_error_quadratically() {
    // heat on cos: v = e^{-τ/2} cos x
    let tau: f64 = 0.5;
    let exact = |x: &[f64]| (-0.5 * tau).exp() * x[0].cos();
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dx| interior_error(&slab_solve(&heat(1, 1.0), dx, 6.0, tau, Scheme::Explicit, |x| x[0].cos()), 2.0, exact))
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 1.7, "{errs:?}");
    }
}

#[test]
fn exact_examples() {
    let grid = g3();
    let cfg = FdConfig::default().with_dx(0.1);
    let x = zero_path();
    let a = solve_vn_exact(&heat(1, 1.0), &integral(lebesgue()), &grid, (0.0, &x), &cfg).unwrap();
    assert!(a.abs() < 1e-10, "{a}");
    // PC projection: ∫ = 0.5·x_0 + 0.5·x_{0.5}, so E[(0.5 W_{0.5})²] = 0.25·0.5
    let oracle = 0.25 * 0.5;
    let b = solve_vn_exact(&heat(1, 1.0), &integral_squared(lebesgue()), &grid, (0.0, &x), &cfg).unwrap();
    assert!((b - oracle).abs() < 1e-3, "{b}");
}

#[test]
fn exact_matches_markovian_solve_for_path_free_data() {
    let grid = GridSequence::dyadic(1.0).unwrap().level(2).unwrap();
    let cfg = FdConfig::default().with_dx(0.1);
    let x = Path::scalar_pc(1.0, vec![0.0, 0.3], vec![1.0, 0.5]).unwrap();
    let v = solve_vn_exact(&bsb(&[0.1, 0.2]), &square(), &grid, (0.4, &x), &cfg).unwrap();
    assert!((v - (0.25 + 0.04 * 0.6)).abs() < 1e-8, "{v}");
}

#[test]
fn exact_rejects_deep_levels_and_two_dimensions() {
    let grid = GridSequence::dyadic(1.0).unwrap().level(5).unwrap();
    let x = zero_path();
    let err = solve_vn_exact(&heat(1, 1.0), &square(), &grid, (0.0, &x), &FdConfig::default()).unwrap_err();
    assert!(matches!(err, Error::LevelTooDeep { n: 32, max: 4 }));
    let x2 = Path::constant(1.0, &[0.0, 0.0], PathMode::CadlagPC).unwrap();
    assert!(solve_vn_exact(&heat(2, 1.0), &norm_squared(2), &g3(), (0.0, &x2), &FdConfig::default()).is_err());
}

#[test]
fn lift_examples() {
    let x = zero_path();
    let cfg = FdConfig::default();
    let v = solve_vn_lift(&heat(1, 1.0), &integral_squared(lebesgue()), &g3(), (0.0, &x), &cfg).unwrap();
    assert!((v.value - 0.125).abs() < 1e-3, "{}", v.value);
    let seq = GridSequence::dyadic(1.0).unwrap();
    let x1 = Path::constant(1.0, &[1.0], PathMode::CadlagPC).unwrap();
    for n in 1..=4 {
        let grid = seq.level(n).unwrap();
        let lin = solve_vn_lift(&heat(1, 1.0), &integral(lebesgue()), &grid, (0.0, &x), &cfg).unwrap();
        assert!(lin.value.abs() < 1e-10);
        let b = solve_vn_lift(&bsb(&[0.1, 0.2]), &square(), &grid, (0.0, &x1), &cfg).unwrap();
        assert!((b.value - 1.04).abs() < 1e-6, "{}", b.value);
    }
}

#[test]
fn lift_weights_by_mode() {
    let grid = GridSequence::dyadic(1.0).unwrap().level(2).unwrap();
    let pc = lift_weights(&lebesgue(), &grid, PathMode::CadlagPC);
    let pl = lift_weights(&lebesgue(), &grid, PathMode::ContinuousPL);
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-14);
    assert!(close(&pc, &[0.25, 0.25, 0.25, 0.25, 0.0]));
    assert!(close(&pl, &[0.125, 0.25, 0.25, 0.25, 0.125]));
    let atom = AtomicMeasure::dirac(1.0, 2.0).unwrap();
    assert_eq!(lift_weights(&atom, &grid, PathMode::CadlagPC), vec![0.0, 0.0, 0.0, 0.0, 2.0]);
}

#[test]
fn lift_continuous_mode_closed_form() {
    // heat is exact on quadratics, so v^n = E[(trapezoid of W)²] = 1/3 − h²/12
    let cfg = FdConfig::default().with_mode(PathMode::ContinuousPL);
    let x = zero_path();
    for n in 1..=3 {
        let grid = GridSequence::dyadic(1.0).unwrap().level(n).unwrap();
        let h = 1.0 / grid.n() as f64;
        let v = solve_vn_lift(&heat(1, 1.0), &integral_squared(lebesgue()), &grid, (0.0, &x), &cfg).unwrap();
        assert!((v.value - (1.0 / 3.0 - h * h / 12.0)).abs() < 1e-3, "{n}: {}", v.value);
    }
}

#[test]
fn lift_requires_a_summary() {
    let x = zero_path();
    let err = solve_vn_lift(&heat(1, 1.0), &product(0.5), &g3(), (0.0, &x), &FdConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Summary(_)));
}

#[test]
fn lift_with_path_dependent_generator_agrees_with_exact() {
    let f = linear_path(LinearPathParams::default());
    let g = square();
    let grid = g3();
    // both are first order in dx through the upwind drift
    let cfg = FdConfig::default().with_dx(0.05);
    let x = Path::scalar_pc(1.0, vec![0.0, 0.5], vec![0.3, -0.4]).unwrap();
    for t in [0.0, 0.5, 0.7] {
        let a = solve_vn_lift(&f, &g, &grid, (t, &x), &cfg).unwrap().value;
        let b = solve_vn_exact(&f, &g, &grid, (t, &x), &cfg).unwrap();
        assert!((a - b).abs() < 2e-3, "{t}: {a} {b}");
    }
}

#[test]
fn gluing_at_slab_boundary() {
    // v^n at t_1 equals the slab-1 solve with the key extended by x_{t_1}
    let grid = g3();
    let f = heat(1, 1.0);
    let g = integral_squared(lebesgue());
    let cfg = FdConfig::default().with_dx(0.1).with_radius(6.0);
    let x = Path::scalar_pc(1.0, vec![0.0, 0.5], vec![0.4, -0.2]).unwrap();
    let at = solve_vn_exact(&f, &g, &grid, (0.5, &x), &cfg).unwrap();
    let key = FrozenKey::new(&grid, 1, 1, vec![0.4, -0.2]).unwrap();
    let fr = freeze(&f, &grid, &key, PathMode::CadlagPC).unwrap();
    let dt = 0.9 * explicit_dt_limit(&fr, (0.5, 1.0), 1, 0.1).unwrap();
    let mesh = SlabMesh::new(vec![-0.2], 6.0, 0.1, dt).unwrap();
    let terminal = ValueField::from_fn(mesh, 1.0, |y| {
        let k = key.extended(&grid, y).unwrap();
        terminal_on_key(&g, &grid, &k, PathMode::CadlagPC).unwrap()
    });
    let v = solve_slab(&fr, &terminal, (0.5, 1.0), Scheme::Explicit).unwrap();
    assert!((v.interp(&[-0.2]) - at).abs() < 1e-9);
    // closed form: (0.5·0.4 + 0.5·(−0.2))² regardless of the last increment
    assert!((at - 0.01).abs() < 1e-9, "{at}");
    let lift = solve_vn_lift(&f, &g, &grid, (0.5, &x), &cfg).unwrap().value;
    assert!((lift - at).abs() < 1e-9);
}

#[test]
fn lift_growth_is_uniform_in_level() {
    let x = zero_path();
    let cfg = FdConfig::default().with_dx(0.1);
    let growth: Vec<f64> = (1..=6)
        .map(|n| {
            let grid = GridSequence::dyadic(1.0).unwrap().level(n).unwrap();
            solve_vn_lift(&heat(1, 1.0), &huber_integral(lebesgue()), &grid, (0.0, &x), &cfg)
                .unwrap()
                .growth
        })
        .collect();
    let hi = growth.iter().cloned().fold(0.0, f64::max);
    let lo = growth.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi <= 2.0 * lo && hi < 10.0, "{growth:?}");
}

#[test]
fn doubling_radius_leaves_the_query() {
    let x = Path::constant(1.0, &[0.5], PathMode::CadlagPC).unwrap();
    let grid = g3();
    let f = heat(1, 1.0);
    let g = sin_integral_plus_terminal(lebesgue(), 0.5, 1.0);
    let base = FdConfig::default().with_dx(0.1);
    let a = solve_vn_lift(&f, &g, &grid, (0.0, &x), &base).unwrap().value;
    let cfg2 = base.clone().with_radius(2.0 * 6.0);
    let b = solve_vn_lift(&f, &g, &grid, (0.0, &x), &cfg2).unwrap().value;
    assert!((a - b).abs() < 1e-4, "{a} {b}");
}

#[test]
fn comparison_examples() {
    let grid = g3();
    let x = zero_path();
    let cfg = FdConfig::default().with_dx(0.1).with_radius(4.0).with_dt(0.004);
    let f = heat(1, 1.0);
    let g = integral_squared(lebesgue());
    let base = solve_vn_lift(&f, &g, &grid, (0.0, &x), &cfg).unwrap();

    let same = comparison_check(&base, &base, None).unwrap();
    assert_eq!(same.max_violation, 0.0);

    let up = solve_vn_lift(&f, &g.shifted(1.0), &grid, (0.0, &x), &cfg).unwrap();
    let premise = comparison_premise(&f, &f, &g.shifted(1.0), &g, 1.0, 100, 1).unwrap();
    assert!(premise.holds());
    let rep = comparison_check(&up, &base, Some(&premise)).unwrap();
    assert!(rep.passed() && (rep.max_violation + 1.0).abs() < 1e-9);

    let src = solve_vn_lift(&f.shifted(1.0), &g, &grid, (0.0, &x), &cfg).unwrap();
    assert!((src.value - base.value - 1.0).abs() < 1e-9);
    for (a, b) in src.fields.iter().zip(&base.fields) {
        let gap = 1.0 - a.time;
        for (p, q) in a.values.iter().zip(&b.values) {
            assert!((p - q - gap).abs() < 1e-9);
        }
    }
    assert!(comparison_check(&src, &base, None).unwrap().passed());
    // reversed order: the premise fails, so the report is inconclusive
    let bad = comparison_premise(&f, &f.shifted(1.0), &g, &g, 1.0, 50, 2).unwrap();
    assert!(!bad.holds());
    let rep = comparison_check(&base, &src, Some(&bad)).unwrap();
    assert!(rep.inconclusive && rep.max_violation > 0.5);
}

#[test]
fn comparison_needs_shared_lattices() {
    let grid = g3();
    let x = zero_path();
    let f = heat(1, 1.0);
    let g = square();
    let a = solve_vn_lift(&f, &g, &grid, (0.0, &x), &FdConfig::default().with_dx(0.1)).unwrap();
    let b = solve_vn_lift(&f, &g, &grid, (0.0, &x), &FdConfig::default().with_dx(0.05)).unwrap();
    assert!(comparison_check(&a, &b, None).is_err());
}

fn random_queries() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.0f64..0.999, proptest::collection::vec(-1.0f64..1.0, 5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn scheme_is_monotone(bumps in proptest::collection::vec(0.0f64..1.0, 41), bsb_case in any::<bool>()) {
        let f = if bsb_case { bsb(&[0.3, 1.0]) } else { linear_path(LinearPathParams::default()) };
        let grid = g3();
        let key = FrozenKey::new(&grid, 0, 1, vec![0.2]).unwrap();
        let fr = freeze(&f, &grid, &key, PathMode::CadlagPC).unwrap();
        let dx = 0.1;
        let dt = 0.9 * explicit_dt_limit(&fr, (0.0, 0.5), 1, dx).unwrap();
        let mesh = SlabMesh::new(vec![0.0], 2.0, dx, dt).unwrap();
        let lo = ValueField::from_fn(mesh.clone(), 0.5, |x| (x[0] * 3.0).sin());
        let mut hi = lo.clone();
        for (v, b) in hi.values.iter_mut().zip(&bumps) {
            *v += b;
        }
        for scheme in [Scheme::Explicit, Scheme::ImplicitPolicy] {
            let a = solve_slab(&fr, &lo, (0.0, 0.5), scheme).unwrap();
            let b = solve_slab(&fr, &hi, (0.0, 0.5), scheme).unwrap();
            for (p, q) in a.values.iter().zip(&b.values) {
                prop_assert!(q >= &(p - 1e-12));
            }
        }
    }

    #[test]
    fn lift_agrees_with_exact((t, vals) in random_queries(), n in 1usize..=3) {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let x = Path::scalar_pc(1.0, vec![0.0, 0.2, 0.4, 0.6, 0.8], vals).unwrap();
        let cfg = FdConfig::default().with_dx(0.1);
        let f = heat(1, 1.0);
        let g = integral_squared(lebesgue());
        let a = solve_vn_lift(&f, &g, &grid, (t, &x), &cfg).unwrap().value;
        let b = solve_vn_exact(&f, &g, &grid, (t, &x), &cfg).unwrap();
        prop_assert!((a - b).abs() < 2e-3, "{} {}", a, b);
    }
}
