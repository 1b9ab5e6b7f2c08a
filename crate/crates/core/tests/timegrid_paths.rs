use ppde::timegrid_paths::*;
use proptest::prelude::*;

fn g3() -> TimeGrid {
    TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap()
}

#[test]
fn eta_examples() {
    let g = g3();
    assert_eq!(eta(&g, 0.7).unwrap(), 0.5);
    assert_eq!(eta(&g, 1.0).unwrap(), 1.0);
    assert_eq!(eta(&g, 0.5).unwrap(), 0.5);
    assert_eq!(eta(&g, 0.0).unwrap(), 0.0);
    assert!(eta(&g, 1.5).is_err());
    assert!(eta(&g, -0.1).is_err());
}

#[test]
fn eta_plus_examples() {
    let g = g3();
    assert_eq!(eta_plus(&g, 0.5).unwrap(), 0.5);
    assert_eq!(eta_plus(&g, 0.7).unwrap(), 1.0);
    assert_eq!(eta_plus(&g, 0.0).unwrap(), 0.0);
    assert_eq!(eta_plus(&g, 1e-9).unwrap(), 0.5);
    assert!(eta_plus(&g, 2.0).is_err());
}

#[test]
fn grid_membership_absorbs_float_noise() {
    let g = TimeGrid::uniform(1.0, 10).unwrap();
    assert_eq!(g.slab_index(0.3 - 1e-15).unwrap(), 3);
    assert_eq!(g.index_of(0.1 + 0.2), Some(3));
}

#[test]
fn grid_validation() {
    assert!(TimeGrid::new(vec![0.0]).is_err());
    assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
    assert!(TimeGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    assert!(TimeGrid::new(vec![0.0, -1.0]).is_err());
}

#[test]
fn sequences_are_nested() {
    for seq in [GridSequence::dyadic(1.0).unwrap(), GridSequence::triadic(2.0).unwrap()] {
        for n in 1..5 {
            let a = seq.level(n).unwrap();
            let b = seq.level(n + 1).unwrap();
            assert!(a.is_subset_of(&b));
            assert!(b.mesh() < a.mesh());
        }
    }
    let d = GridSequence::dyadic(1.0).unwrap();
    assert_eq!(d.level(3).unwrap().n(), 8);
    let bad = GridSequence::from_grids(vec![
        TimeGrid::uniform(1.0, 2).unwrap(),
        TimeGrid::uniform(1.0, 3).unwrap(),
    ]);
    assert!(bad.is_err());
    let good = GridSequence::from_grids(vec![
        TimeGrid::uniform(1.0, 2).unwrap(),
        TimeGrid::uniform(1.0, 6).unwrap(),
    ])
    .unwrap();
    assert_eq!(good.level(2).unwrap().n(), 6);
    assert!(good.level(3).is_err());
}

#[test]
fn project_constant_path() {
    let x = Path::constant(1.0, &[2.5], PathMode::ContinuousPL).unwrap();
    let g = TimeGrid::uniform(1.0, 4).unwrap();
    for t in [0.1, 0.5, 0.77, 1.0] {
        let p = project(&g, &x, t).unwrap();
        for s in [0.0, 0.3, 0.6, 1.0] {
            assert_eq!(p.value1(s), 2.5);
        }
    }
}

#[test]
fn project_pc_example() {
    let x = Path::scalar_pc(1.0, vec![0.0, 0.5, 0.8], vec![1.0, 2.0, 3.0]).unwrap();
    let p = project(&g3(), &x, 0.8).unwrap();
    assert_eq!(p.value1(0.0), 1.0);
    assert_eq!(p.value1(0.49), 1.0);
    assert_eq!(p.value1(0.5), 2.0);
    assert_eq!(p.value1(0.79), 2.0);
    assert_eq!(p.value1(0.8), 3.0);
    assert_eq!(p.value1(1.0), 3.0);
}

#[test]
fn project_pl_fixed_point() {
    let x = Path::scalar_pl(1.0, vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
    let p = project(&g3(), &x, 1.0).unwrap();
    assert!(dist_uniform(&p, &x, 1.0).unwrap() < 1e-15);
}

#[test]
fn project_pl_interpolates_and_freezes() {
    let x = Path::scalar_pl(1.0, vec![0.0, 0.25, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
    let p = project(&g3(), &x, 0.75).unwrap();
    // nodes (0, 0), (0.5, 1), (0.75, 1), flat afterwards
    assert!((p.value1(0.25) - 0.5).abs() < 1e-15);
    assert_eq!(p.value1(0.9), 1.0);
    assert!(project(&g3(), &x, 0.0).is_err());
}

#[test]
fn concat_examples() {
    let a = Path::constant(1.0, &[1.0], PathMode::ContinuousPL).unwrap();
    let b = Path::constant(1.0, &[2.0], PathMode::ContinuousPL).unwrap();
    assert_eq!(concat(&a, 0.0, &b), b);
    let c = concat(&a, 0.5, &b);
    assert_eq!(c.mode(), PathMode::CadlagPC);
    assert_eq!(c.value1(0.49), 1.0);
    assert_eq!(c.value1(0.5), 2.0);
    assert_eq!(c.left_limit(0.5), vec![1.0]);
    let d = concat(&a, 1.0, &b);
    assert_eq!(d.value1(0.999), 1.0);
    assert_eq!(d.value1(1.0), 2.0);
    let ramp = Path::scalar_pl(1.0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
    let tail = Path::constant(1.0, &[0.5], PathMode::ContinuousPL).unwrap();
    let e = concat(&ramp, 0.5, &tail);
    assert_eq!(e.mode(), PathMode::ContinuousPL);
    assert!((e.value1(0.25) - 0.25).abs() < 1e-15);
    assert_eq!(e.value1(0.8), 0.5);
}

#[test]
fn bump_is_vertical() {
    let ramp = Path::scalar_pl(1.0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
    let b = ramp.bumped(0.4, &[0.1]);
    assert!((b.value1(0.2) - 0.2).abs() < 1e-15);
    assert!((b.value1(0.4) - 0.5).abs() < 1e-15);
    assert!((b.value1(0.9) - 1.0).abs() < 1e-15);
    assert!((b.left_limit(0.4)[0] - 0.4).abs() < 1e-15);
}

#[test]
fn stopped_path() {
    let x = Path::scalar_pl(2.0, vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
    let s = x.stopped(0.5);
    assert_eq!(s.value1(0.25), 0.5);
    assert_eq!(s.value1(1.5), 1.0);
    assert_eq!(s.mode(), PathMode::ContinuousPL);
}

#[test]
fn uniform_distance_examples() {
    let x = Path::constant(1.0, &[0.3], PathMode::CadlagPC).unwrap();
    assert_eq!(dist_uniform(&x, &x, 1.0).unwrap(), 0.0);
    let a = Path::constant(1.0, &[1.0], PathMode::CadlagPC).unwrap();
    let b = Path::constant(1.0, &[-2.0], PathMode::CadlagPC).unwrap();
    assert_eq!(dist_uniform(&a, &b, 1.0).unwrap(), 3.0);
    let ramp = Path::scalar_pl(1.0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
    let zero = Path::constant(1.0, &[0.0], PathMode::ContinuousPL).unwrap();
    assert!((dist_uniform(&ramp, &zero, 0.5).unwrap() - 0.5).abs() < 1e-15);
}

fn step(t0: f64) -> Path {
    Path::scalar_pc(1.0, vec![0.0, t0], vec![0.0, 1.0]).unwrap()
}

/// Independent brute force: λ piecewise linear through `(τ_i, s_i)` for the jumps
/// `τ_i` of `x`, images `s_i` on a monotone lattice; sup-norm evaluated on a fine
/// time sample of both compositions.
fn skorokhod_brute(x: &Path, xp: &Path, lattice: usize) -> f64 {
    let jumps: Vec<f64> = x.breakpoints()[1..].to_vec();
    let p = jumps.len();
    let cand: Vec<f64> = {
        let mut c: Vec<f64> = (1..lattice).map(|k| k as f64 / lattice as f64).collect();
        c.extend_from_slice(&xp.breakpoints()[1..]);
        c.extend_from_slice(&jumps);
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    };
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; p];
    loop {
        let imgs: Vec<f64> = idx.iter().map(|&k| cand[k]).collect();
        if imgs.windows(2).all(|w| w[1] > w[0]) {
            let mut knots = vec![(0.0, 0.0)];
            knots.extend(jumps.iter().copied().zip(imgs.iter().copied()));
            knots.push((1.0, 1.0));
            let lam = |s: f64| {
                let k = knots.partition_point(|kn| kn.0 <= s).clamp(1, knots.len() - 1);
                let (a, b) = (knots[k - 1], knots[k]);
                a.1 + (s - a.0) / (b.0 - a.0) * (b.1 - a.1)
            };
            let disp = knots.iter().map(|k| (k.1 - k.0).abs()).fold(0.0, f64::max);
            let mut gap: f64 = 0.0;
            // sample s strictly between the knots and jump preimages
            let m = 4000;
            for k in 0..=m {
                let s = (k as f64 + 0.5) / (m as f64 + 1.0);
                gap = gap.max((x.value1(s) - xp.value1(lam(s))).abs());
            }
            gap = gap.max((x.value1(1.0) - xp.value1(1.0)).abs());
            best = best.min(disp + gap);
        }
        let mut pos = 0;
        loop {
            if pos == p {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < cand.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn skorokhod_step_example_against_brute_force() {
    let (x, xp) = (step(0.5), step(0.6));
    let oracle = skorokhod_brute(&x, &xp, 200);
    assert!((oracle - 0.1).abs() < 1e-9, "oracle {oracle}");
    let d = dist_skorokhod(&x, &xp, 1.0, &AtomicMeasure::zero()).unwrap();
    assert!((d - 0.1).abs() < 1e-12, "dp {d}");
}

#[test]
fn skorokhod_trivial_examples() {
    let a = Path::constant(1.0, &[1.0], PathMode::CadlagPC).unwrap();
    let b = Path::constant(1.0, &[-0.5], PathMode::CadlagPC).unwrap();
    let mu = AtomicMeasure::zero();
    assert_eq!(dist_skorokhod(&a, &a, 1.0, &mu).unwrap(), 0.0);
    assert_eq!(dist_skorokhod(&a, &b, 1.0, &mu).unwrap(), 1.5);
    let pl = Path::scalar_pl(1.0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
    assert!(dist_skorokhod(&pl, &a, 1.0, &mu).is_err());
}

#[test]
fn skorokhod_matches_brute_force_on_two_jump_paths() {
    let cases = [
        (vec![0.0, 0.3, 0.7], vec![0.0, 1.0, -0.5], vec![0.0, 0.35, 0.8], vec![0.0, 0.9, -0.4]),
        (vec![0.0, 0.2, 0.4], vec![1.0, 0.0, 2.0], vec![0.0, 0.6], vec![1.0, 2.0]),
        (vec![0.0, 0.5], vec![0.0, 3.0], vec![0.0, 0.1, 0.9], vec![0.0, 0.2, 3.0]),
    ];
    for (ta, va, tb, vb) in cases {
        let x = Path::scalar_pc(1.0, ta, va).unwrap();
        let xp = Path::scalar_pc(1.0, tb, vb).unwrap();
        let dp = dist_skorokhod(&x, &xp, 1.0, &AtomicMeasure::zero()).unwrap();
        let brute = skorokhod_brute(&x, &xp, 100);
        assert!(dp <= brute + 1e-9, "dp {dp} brute {brute}");
        assert!(brute - dp <= 0.011, "dp {dp} brute {brute}");
    }
}

#[test]
fn skorokhod_with_measure_adds_integral() {
    let (x, xp) = (step(0.5), step(0.6));
    let mu = AtomicMeasure::lebesgue(0.0, 1.0).unwrap();
    let d = dist_skorokhod(&x, &xp, 1.0, &mu).unwrap();
    assert!((d - 0.2).abs() < 1e-12);
    let atom = AtomicMeasure::dirac(0.5, 2.0).unwrap();
    let d = dist_skorokhod(&x, &xp, 1.0, &atom).unwrap();
    assert!((d - 2.1).abs() < 1e-12);
}

/// The Skorokhod part is not monotone in `t`: a jump of one path just before `s`
/// cannot be matched until the other path jumps.
#[test]
fn skorokhod_rho_is_not_monotone_in_time() {
    let x = Path::scalar_pc(1.0, vec![0.0, 0.115], vec![1.5, 0.0]).unwrap();
    let y = Path::scalar_pc(1.0, vec![0.0, 0.01], vec![1.35, 0.0]).unwrap();
    let mu = AtomicMeasure::zero();
    let early = dist_skorokhod(&x, &y, 0.1, &mu).unwrap();
    let late = dist_skorokhod(&x, &y, 0.36, &mu).unwrap();
    assert!((early - 1.5).abs() < 1e-12, "{early}");
    assert!((late - 0.255).abs() < 1e-12, "{late}");
}

#[test]
fn measure_masses_and_integrals() {
    let mu = AtomicMeasure::lebesgue(0.0, 1.0)
        .unwrap()
        .with_atom(0.5, 2.0)
        .unwrap();
    assert!((mu.mass(0.0, 0.5, Ends::RightOpen) - 0.5).abs() < 1e-15);
    assert!((mu.mass(0.0, 0.5, Ends::Closed) - 2.5).abs() < 1e-15);
    assert!((mu.total_mass() - 3.0).abs() < 1e-15);
    let ramp = Path::scalar_pl(1.0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
    // ∫_0^1 s ds + 2·0.5
    assert!((mu.integrate_upto(&ramp, 1.0)[0] - 1.5).abs() < 1e-14);
    assert!((mu.integrate_upto(&ramp, 0.4)[0] - 0.08).abs() < 1e-14);
    let tri = AtomicMeasure::new(
        vec![],
        Some(Density::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap()),
    )
    .unwrap();
    // ∫ s · 2s ds = 2/3
    assert!((tri.integrate_upto(&ramp, 1.0)[0] - 2.0 / 3.0).abs() < 1e-14);
    let seq = GridSequence::dyadic(1.0).unwrap();
    assert!(mu.check_atoms_on(&seq, 3).is_ok());
    let off = AtomicMeasure::dirac(0.3, 1.0).unwrap();
    assert!(off.check_atoms_on(&seq, 6).is_err());
}

#[test]
fn literal_round_trip() {
    let x = Path::piecewise_constant(
        2.0,
        vec![0.0, 0.5, 1.25],
        vec![vec![1.0, -1.0], vec![2.0, 0.5], vec![3.0, 0.0]],
    )
    .unwrap();
    let text = io::write_path(&x).unwrap();
    assert_eq!(io::parse_path(&text).unwrap(), x);
    let pl = Path::scalar_pl(1.0, vec![0.0, 0.3, 1.0], vec![0.0, 1.5, -2.0]).unwrap();
    assert_eq!(io::parse_path(&io::write_path(&pl).unwrap()).unwrap(), pl);
    let g = TimeGrid::uniform(1.0, 4).unwrap();
    assert_eq!(io::parse_grid(&io::write_grid(&g)).unwrap(), g);
    assert!(io::parse_path("0.0, 1.0\n").is_err());
    assert!(io::parse_path("# mode: pc\n# horizon: 1\n0.0, 1\n0.5, 1, 2\n").is_err());
}

#[test]
fn projection_converges_for_continuous_paths() {
    let times: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
    let vals: Vec<f64> = times.iter().map(|s| (7.0 * s).sin() + s * s).collect();
    let x = Path::scalar_pl(1.0, times, vals).unwrap();
    let seq = GridSequence::dyadic(1.0).unwrap();
    let dists: Vec<f64> = (1..=7)
        .map(|n| dist_uniform(&project_full(&seq.level(n).unwrap(), &x).unwrap(), &x, 1.0).unwrap())
        .collect();
    for w in dists[2..].windows(2) {
        assert!(w[1] < w[0], "{dists:?}");
    }
    assert!(dists[6] < 2e-3);
    let xpc = x.clone().with_mode(PathMode::CadlagPC);
    let last = dist_uniform(&project_full(&seq.level(8).unwrap(), &xpc).unwrap(), &x, 1.0).unwrap();
    assert!(last < 0.05);
}

fn pc_path() -> impl Strategy<Value = Path> {
    (proptest::collection::vec((0.01f64..0.99, -2.0f64..2.0), 0..4), -2.0f64..2.0).prop_map(
        |(mut jumps, v0)| {
            jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            jumps.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
            let mut times = vec![0.0];
            let mut vals = vec![v0];
            for (t, v) in jumps {
                times.push(t);
                vals.push(v);
            }
            Path::scalar_pc(1.0, times, vals).unwrap()
        },
    )
}

fn pl_path() -> impl Strategy<Value = Path> {
    proptest::collection::vec(-2.0f64..2.0, 2..8).prop_map(|vals| {
        let n = vals.len();
        let times = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        Path::scalar_pl(1.0, times, vals).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn uniform_metric_axioms(x in pc_path(), y in pc_path(), z in pc_path(), t in 0.0f64..1.0) {
        let dxy = dist_uniform(&x, &y, t).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy, dist_uniform(&y, &x, t).unwrap());
        prop_assert_eq!(dist_uniform(&x, &x, t).unwrap(), 0.0);
        let dxz = dist_uniform(&x, &z, t).unwrap();
        let dzy = dist_uniform(&z, &y, t).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-12);
    }

    #[test]
    fn skorokhod_metric_axioms(x in pc_path(), y in pc_path(), z in pc_path(), t in 0.05f64..1.0) {
        let mu = AtomicMeasure::zero();
        let dxy = dist_skorokhod(&x, &y, t, &mu).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - dist_skorokhod(&y, &x, t, &mu).unwrap()).abs() < 1e-12);
        prop_assert_eq!(dist_skorokhod(&x, &x, t, &mu).unwrap(), 0.0);
        let dxz = dist_skorokhod(&x, &z, t, &mu).unwrap();
        let dzy = dist_skorokhod(&z, &y, t, &mu).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-12, "{} > {} + {}", dxy, dxz, dzy);
    }

    #[test]
    fn sandwich_bounds(x in pc_path(), y in pc_path(), t in 0.05f64..1.0, w in 0.0f64..2.0) {
        let zero = AtomicMeasure::zero();
        let mu = AtomicMeasure::lebesgue(0.0, 1.0).unwrap().with_atom(0.5, w).unwrap();
        let lower = dist_skorokhod(&x.stopped(t), &y.stopped(t), 1.0, &zero).unwrap();
        let rho = dist_skorokhod(&x, &y, t, &mu).unwrap();
        let upper = sandwich_upper(&x, &y, t, &mu).unwrap();
        prop_assert!(lower <= rho + 1e-12);
        prop_assert!(rho <= upper + 1e-12);
    }

    #[test]
    fn rho_monotone_in_time(x in pc_path(), y in pc_path(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        prop_assert!(dist_uniform(&x, &y, s).unwrap() <= dist_uniform(&x, &y, t).unwrap());
    }

    #[test]
    fn projection_idempotent(x in pc_path(), y in pl_path(), n in 1usize..5) {
        let g = GridSequence::dyadic(1.0).unwrap().level(n).unwrap();
        for p in [x, y] {
            let once = project_full(&g, &p).unwrap();
            let twice = project_full(&g, &once).unwrap();
            prop_assert!(dist_uniform(&once, &twice, 1.0).unwrap() < 1e-14);
        }
    }

    #[test]
    fn refinement_keeps_adapted_paths(vals in proptest::collection::vec(-2.0f64..2.0, 5), n in 2usize..5) {
        let seq = GridSequence::dyadic(1.0).unwrap();
        let coarse = seq.level(2).unwrap();
        let x = Path::scalar_pc(1.0, coarse.points()[..4].to_vec(), vals[..4].to_vec()).unwrap();
        let fine = seq.level(n).unwrap();
        let p = project_full(&fine, &x).unwrap();
        prop_assert!(dist_uniform(&p, &x, 1.0).unwrap() < 1e-15);
    }
}
