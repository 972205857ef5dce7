//! Independent oracles for the integration and acceptance tests. Nothing here
//! uses the crate's potential, census or quadrature: everything is rebuilt from
//! direct integration of `u'' = −f(u)` and dense sampling of `f`.
#![allow(dead_code)]

use chainscope::nonlinearity::{mf_extend, AnalysisSettings, Nonlinearity};

pub const KAPPA: f64 = 2.0;
pub const BLEND: f64 = 0.5;

fn extended(base: Nonlinearity, window: Option<(f64, f64)>) -> Nonlinearity {
    let f = mf_extend(&base, KAPPA, BLEND, &AnalysisSettings::default())
        .expect("extension")
        .f;
    match window {
        Some(w) => f.with_window(w).expect("window"),
        None => f,
    }
}

/// `u − u³`, extended.
pub fn cubic() -> Nonlinearity {
    extended(Nonlinearity::preset("cubic_bistable", (-2.0, 2.0)).unwrap(), None)
}

/// `u² − u`, extended; the chain through 0 reaches `−√15.75`, so the window is widened.
pub fn quadratic() -> Nonlinearity {
    extended(
        Nonlinearity::preset("quadratic_groundstate", (-2.0, 2.0)).unwrap(),
        Some((-5.0, 5.0)),
    )
}

/// `1 − u²`, extended.
pub fn logistic() -> Nonlinearity {
    extended(Nonlinearity::polynomial(vec![1.0, 0.0, -1.0], (-2.0, 2.0)).unwrap(), None)
}

/// Zeros at −1/2, 1/2, 3/2; a narrower blend keeps the top zero out of it.
pub fn shifted_cubic() -> Nonlinearity {
    let base = Nonlinearity::preset("shifted_cubic", (-2.0, 2.0)).unwrap();
    mf_extend(&base, KAPPA, 0.4, &AnalysisSettings::default())
        .expect("extension")
        .f
        .with_window((-8.0, 8.0))
        .expect("window")
}

/// Zeros of f from dense sampling and bisection, with a centred-difference slope.
pub fn oracle_zeros(f: &Nonlinearity, samples: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = f.window();
    let h = (hi - lo) / samples as f64;
    let mut out = Vec::new();
    for i in 0..samples {
        let (mut a, mut b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        let (fa, fb) = (f.value(a), f.value(b));
        if fa == 0.0 {
            out.push(a);
            continue;
        }
        if (fa > 0.0) == (fb > 0.0) || fb == 0.0 {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f.value(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out.into_iter()
        .map(|z| (z, (f.value(z + 1e-6) - f.value(z - 1e-6)) / 2e-6))
        .collect()
}

fn orbit_step(f: &Nonlinearity, (u, v): (f64, f64), dt: f64) -> (f64, f64) {
    let k1 = (v, -f.value(u));
    let k2 = (v + 0.5 * dt * k1.1, -f.value(u + 0.5 * dt * k1.0));
    let k3 = (v + 0.5 * dt * k2.1, -f.value(u + 0.5 * dt * k2.0));
    let k4 = (v + dt * k3.1, -f.value(u + dt * k3.0));
    (
        u + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        v + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Whether the orbit released at rest from `u0` passes `barrier` within one period.
pub fn crosses(f: &Nonlinearity, u0: f64, barrier: f64, dt: f64) -> bool {
    if f.value(u0).abs() < 1e-14 {
        return false;
    }
    let ahead = |u: f64| if barrier > u0 { u > barrier } else { u < barrier };
    let mut state = (u0, 0.0);
    let mut last_sign = 0.0f64;
    let mut flips = 0;
    let mut t = 0.0;
    while t < 400.0 {
        state = orbit_step(f, state, dt);
        t += dt;
        if ahead(state.0) {
            return true;
        }
        let s = state.1.signum();
        if s != 0.0 {
            if last_sign != 0.0 && s != last_sign {
                flips += 1;
                if flips == 2 {
                    return false;
                }
            }
            last_sign = s;
        }
    }
    false
}

/// End of the chain through `saddle` on one side (`dir = −1` left, `+1` right):
/// the first release point whose orbit passes the saddle, refined by bisection.
pub fn chain_end(f: &Nonlinearity, saddle: f64, dir: f64, scan: f64) -> f64 {
    let (lo, hi) = f.window();
    let dt = 5e-4;
    let mut inside = saddle;
    let mut k = 1;
    loop {
        let u0 = saddle + dir * k as f64 * scan;
        assert!(u0 > lo && u0 < hi, "chain end not found inside the window");
        if crosses(f, u0, saddle, dt) {
            let mut outside = u0;
            while (outside - inside).abs() > 1e-8 {
                let m = 0.5 * (inside + outside);
                if crosses(f, m, saddle, dt) {
                    outside = m;
                } else {
                    inside = m;
                }
            }
            return 0.5 * (inside + outside);
        }
        inside = u0;
        k += 1;
    }
}

#[derive(Debug, Clone)]
pub struct OracleChain {
    pub p: f64,
    pub q: f64,
    pub saddles: Vec<f64>,
}

/// Nontrivial chains: saddles grouped by matching orbit intervals.
pub fn oracle_chains(f: &Nonlinearity) -> Vec<OracleChain> {
    let saddles: Vec<f64> = oracle_zeros(f, 100_000)
        .into_iter()
        .filter(|&(_, d)| d < 0.0)
        .map(|(z, _)| z)
        .collect();
    let mut chains: Vec<OracleChain> = Vec::new();
    for s in saddles {
        let p = chain_end(f, s, -1.0, 1e-2);
        let q = chain_end(f, s, 1.0, 1e-2);
        match chains
            .iter_mut()
            .find(|c| (c.p - p).abs() < 1e-6 && (c.q - q).abs() < 1e-6)
        {
            Some(c) => c.saddles.push(s),
            None => chains.push(OracleChain {
                p,
                q,
                saddles: vec![s],
            }),
        }
    }
    chains
}

/// First-return time of the orbit released at rest from `p` (a left turning point).
pub fn period_oracle(f: &Nonlinearity, p: f64, dt: f64) -> f64 {
    let mut state = (p, 0.0);
    let mut t = 0.0;
    let mut flips = 0;
    loop {
        let next = orbit_step(f, state, dt);
        if t > 0.0 && (next.1 > 0.0) != (state.1 > 0.0) {
            flips += 1;
            if flips == 2 {
                // Cubic Hermite for v on [t, t + dt] with v' = −f(u), root by bisection.
                let (v0, v1) = (state.1, next.1);
                let (d0, d1) = (-f.value(state.0) * dt, -f.value(next.0) * dt);
                let h = |s: f64| {
                    let s2 = s * s;
                    let s3 = s2 * s;
                    (2.0 * s3 - 3.0 * s2 + 1.0) * v0
                        + (s3 - 2.0 * s2 + s) * d0
                        + (-2.0 * s3 + 3.0 * s2) * v1
                        + (s3 - s2) * d1
                };
                let (mut a, mut b) = (0.0, 1.0);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if (h(m) > 0.0) == (v0 > 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return t + 0.5 * (a + b) * dt;
            }
        }
        state = next;
        t += dt;
        assert!(t < 1e4, "no return");
    }
}

/// Shift `s` minimizing `sup |u − tanh((x − s)/√2)|` by golden section.
pub fn fit_tanh_shift(xs: &[f64], us: &[f64]) -> (f64, f64) {
    let err = |s: f64| {
        xs.iter()
            .zip(us)
            .map(|(x, u)| (u - ((x - s) / 2f64.sqrt()).tanh()).abs())
            .fold(0.0, f64::max)
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-10.0, 10.0);
    // Coarse bracket first: the error is unimodal only near the optimum.
    let coarse = (0..=400)
        .map(|k| a + (b - a) * k as f64 / 400.0)
        .min_by(|x, y| err(*x).total_cmp(&err(*y)))
        .unwrap();
    a = coarse - 0.05;
    b = coarse + 0.05;
    for _ in 0..80 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if err(c) < err(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    (s, err(s))
}

pub fn standing_front(x: f64) -> f64 {
    (x / 2f64.sqrt()).tanh()
}

/// Ground state of `u'' + u² − u = 0`.
pub fn ground_state(x: f64) -> f64 {
    1.5 / (0.5 * x).cosh().powi(2)
}
