mod common;

use chainscope::pde::{reflection_fixture, solve, Bump, Grid, InitialData, Snapshot, SolverConfig};
use chainscope::sturm::{
    audit_monotonicity, check_nc, check_r, default_lambdas, reflect, track, zero_count, SturmError,
};
use proptest::prelude::*;

fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn fixture_reflection_is_exact_and_counts_six() {
    let grid = Grid::new(30.0, 0.01).unwrap();
    let s = Snapshot::from_fn(0.0, grid, |x| reflection_fixture(3.0, 1.0, x));
    let r = reflect(&s, 0.0).unwrap();
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for (x, v) in r.xs.iter().zip(&r.values) {
        if *x > 1.0 && *x < 20.0 {
            assert!((v + (-x).exp() * x.sin()).abs() < 1e-12);
            xs.push(*x);
            vs.push(*v);
        }
    }
    let rep = zero_count(&vs, &xs, (1.0, 20.0), None).unwrap();
    assert_eq!(rep.count, 6);
    for (n, loc) in rep.locations.iter().enumerate() {
        assert!((loc - (n + 1) as f64 * std::f64::consts::PI).abs() < 1e-4);
    }
}

#[test]
fn symmetric_data_reflect_to_nothing() {
    let grid = Grid::new(20.0, 0.05).unwrap();
    let s = Snapshot::from_fn(0.0, grid, |x| (-(x - 2.0).powi(2)).exp());
    let r = reflect(&s, 2.0).unwrap();
    let ends = (r.xs[0], r.xs[r.xs.len() - 1]);
    assert!(matches!(zero_count(&r.values, &r.xs, ends, None), Err(SturmError::AllBelowTol { .. })));
}

#[test]
fn tangency_is_a_multiple_not_a_zero() {
    let xs = nodes(-2.0, 2.0, 401);
    let v: Vec<f64> = xs.iter().map(|x| (x - 0.3).powi(2) * (x + 1.0)).collect();
    let rep = zero_count(&v, &xs, (-2.0, 2.0), None).unwrap();
    assert_eq!(rep.count, 1);
    assert!((rep.locations[0] + 1.0).abs() < 1e-9);
    assert_eq!(rep.multiples.len(), 1);
    assert!((rep.multiples[0] - 0.3).abs() < 0.05);
}

#[test]
fn solution_differences_lose_zeros_only() {
    let f = common::cubic();
    let base = |amp: f64| {
        let mut cfg = SolverConfig::new(
            6.0,
            InitialData::CompactBump {
                center: 0.0,
                width: 8.0,
                amplitude: amp,
                sign_pattern: vec![1.0, -1.0, 1.0, -1.0],
            },
        );
        cfg.half_width = 30.0;
        cfg.dx = 0.05;
        cfg.dt = 0.01;
        cfg.snapshot_every = Some(0.05);
        solve(&cfg, &f).unwrap()
    };
    let (a, b) = (base(0.6), base(0.3));
    assert!(a.len() > 100);
    let diffs: Vec<Snapshot> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| Snapshot::new(x.t, x.grid, x.u.iter().zip(&y.u).map(|(p, q)| p - q).collect()))
        .collect();
    let reports = track(&diffs, (-30.0, 30.0), |s| s.u.clone());
    assert!(reports[0].1.count >= 3);
    assert!(audit_monotonicity(&reports).is_monotone());

    let ux = track(&a, (-30.0, 30.0), |s| s.ux.clone());
    assert!(audit_monotonicity(&ux).is_monotone());
}

#[test]
fn nc_and_r_on_a_compact_start() {
    let f = common::cubic();
    let mut cfg = SolverConfig::new(
        20.0,
        InitialData::CompactBump { center: 0.0, width: 6.0, amplitude: 0.8, sign_pattern: vec![1.0, -1.0] },
    );
    cfg.half_width = 40.0;
    cfg.dx = 0.05;
    cfg.dt = 0.01;
    cfg.snapshot_every = Some(1.0);
    let snaps = solve(&cfg, &f).unwrap();
    let nc = check_nc(&snaps);
    assert!(nc.holds, "{nc:?}");
    let r = check_r(&snaps, &default_lambdas(40.0));
    assert!(r.holds, "{r:?}");
    assert_eq!(r.per_lambda.len(), 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // sin(ω x + φ) on [0, 10]: the count is the number of interior zeros,
    // independent of scaling and of the grid once it resolves the wave.
    #[test]
    fn sine_counts(omega in 0.3f64..4.0, phase in 0.0f64..std::f64::consts::TAU, scale in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let zeros: Vec<f64> = (-20..60)
            .map(|k| (k as f64 * std::f64::consts::PI - phase) / omega)
            .filter(|z| *z > 0.0 && *z < 10.0)
            .collect();
        prop_assume!(zeros.iter().all(|z| *z > 0.05 && *z < 9.95));
        for n in [2001usize, 4001] {
            let xs = nodes(0.0, 10.0, n);
            let v: Vec<f64> = xs.iter().map(|x| scale * (omega * x + phase).sin()).collect();
            let rep = zero_count(&v, &xs, (0.0, 10.0), None).unwrap();
            prop_assert_eq!(rep.count, zeros.len());
            prop_assert!(rep.multiples.is_empty());
            for (a, b) in rep.locations.iter().zip(&zeros) {
                prop_assert!((a - b).abs() < 1e-4);
            }
        }
    }

    // V_λ u is odd about λ whenever the mirror map is node-to-node.
    #[test]
    fn reflection_is_odd_about_lambda(k in -100i32..100, c in -5.0f64..5.0, w in 0.5f64..3.0) {
        let grid = Grid::new(20.0, 0.05).unwrap();
        let lambda = k as f64 * 0.05;
        let init = InitialData::BumpTrain {
            bumps: vec![Bump { center: c, width: w, amplitude: 1.0 }, Bump { center: c + 2.0, width: 1.0, amplitude: -0.5 }],
        };
        let s = Snapshot::from_fn(0.0, grid, |x| init.evaluate(x));
        let r = reflect(&s, lambda).unwrap();
        let n = r.xs.len();
        for i in 0..n {
            prop_assert!((r.xs[i] + r.xs[n - 1 - i] - 2.0 * lambda).abs() < 1e-9);
            prop_assert_eq!(r.values[i], -r.values[n - 1 - i]);
        }
    }
}
