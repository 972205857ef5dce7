//! Discrete zero numbers: deadbanded sign-change counting, tangency detection,
//! the reflection `V_λ u(x) = u(2λ − x) − u(x)`, and the finiteness checks on
//! critical points and reflected zeros.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pde::Snapshot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SturmError {
    #[error("every node is inside the deadband (tol = {tol})")]
    AllBelowTol { tol: f64 },
    #[error("reflection about {lambda} has no overlap with the grid")]
    EmptyOverlap { lambda: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Relative deadband factor: `tol = REL_TOL · sup|v|`.
pub const REL_TOL: f64 = 1e-9;
/// Absolute deadband floor, so that roundoff residue never counts as a signal.
pub const ABS_TOL_FLOOR: f64 = 1e-13;
/// Crossings closer than this many grid spacings are indistinguishable.
pub const MERGE_CELLS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub interval: (f64, f64),
    pub count: usize,
    pub locations: Vec<f64>,
    /// Suspected non-simple zeros.
    pub multiples: Vec<f64>,
    pub tol_band: f64,
}

pub fn deadband(values: &[f64]) -> f64 {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (REL_TOL * sup).max(ABS_TOL_FLOOR)
}

fn grid_spacing(xs: &[f64]) -> f64 {
    if xs.len() >= 2 {
        xs[1] - xs[0]
    } else {
        0.0
    }
}

fn sign(v: f64, tol: f64) -> i8 {
    if v > tol {
        1
    } else if v < -tol {
        -1
    } else {
        0
    }
}

/// Linear interpolation of the raw sign change between nodes `k` and `k + 1`.
fn crossing(xs: &[f64], v: &[f64], k: usize) -> f64 {
    let (a, b) = (v[k], v[k + 1]);
    if a == b {
        return 0.5 * (xs[k] + xs[k + 1]);
    }
    xs[k] + (xs[k + 1] - xs[k]) * a / (a - b)
}

/// Counts zeros of `values` on the nodes inside `interval`.
///
/// Values with `|v| ≤ tol` are treated as zero; a zero run between opposite
/// signs counts once, one between equal signs is a tangency. Runs touching the
/// interval ends are ignored. `tol = None` uses [`deadband`] on the interval.
pub fn zero_count(
    values: &[f64],
    xs: &[f64],
    interval: (f64, f64),
    tol: Option<f64>,
) -> Result<ZeroReport, SturmError> {
    if values.len() != xs.len() {
        return Err(SturmError::Invalid("values and grid differ in length".into()));
    }
    let lo = xs.partition_point(|&x| x < interval.0);
    let hi = xs.partition_point(|&x| x <= interval.1);
    let (xs, v) = (&xs[lo..hi], &values[lo..hi]);
    let tol = tol.unwrap_or_else(|| deadband(v));
    let interval = (
        interval.0.max(xs.first().copied().unwrap_or(interval.0)),
        interval.1.min(xs.last().copied().unwrap_or(interval.1)),
    );
    let signs: Vec<i8> = v.iter().map(|&s| sign(s, tol)).collect();
    if signs.iter().all(|&s| s == 0) {
        return Err(SturmError::AllBelowTol { tol });
    }
    let merge_tol = MERGE_CELLS * grid_spacing(xs);

    let mut crossings = Vec::new();
    let mut multiples = Vec::new();
    let mut last: Option<usize> = None;
    for (j, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if let Some(i) = last {
            let si = signs[i];
            if si != s {
                let loc = if j == i + 1 {
                    crossing(xs, v, i)
                } else {
                    let centre = 0.5 * (xs[i] + xs[j]);
                    (i..j)
                        .filter(|&k| v[k] == 0.0 || (v[k] > 0.0) != (v[k + 1] > 0.0))
                        .map(|k| crossing(xs, v, k))
                        .min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()))
                        .unwrap_or(centre)
                };
                crossings.push(loc);
            } else if j > i + 1 {
                multiples.push(0.5 * (xs[i + 1] + xs[j - 1]));
            }
        }
        last = Some(j);
    }

    let mut locations = Vec::new();
    let mut k = 0;
    while k < crossings.len() {
        let mut end = k + 1;
        while end < crossings.len() && crossings[end] - crossings[end - 1] < merge_tol {
            end += 1;
        }
        let group = &crossings[k..end];
        if group.len() % 2 == 1 {
            locations.push(group[group.len() / 2]);
        } else {
            multiples.push(group.iter().sum::<f64>() / group.len() as f64);
        }
        k = end;
    }
    multiples.sort_by(f64::total_cmp);
    Ok(ZeroReport {
        interval,
        count: locations.len(),
        locations,
        multiples,
        tol_band: tol,
    })
}

fn cluster(points: &[f64], merge_tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < points.len() {
        let mut end = k + 1;
        while end < points.len() && points[end] - points[end - 1] < merge_tol {
            end += 1;
        }
        out.push(0.5 * (points[k] + points[end - 1]));
        k = end;
    }
    out
}

/// Nodes where both `v` and `v_x` are small, clustered by the merge tolerance.
pub fn detect_multiple(values: &[f64], dvalues: &[f64], xs: &[f64], tol_v: f64, tol_dv: f64) -> Vec<f64> {
    let hits: Vec<f64> = values
        .iter()
        .zip(dvalues)
        .zip(xs)
        .filter(|((v, dv), _)| v.abs() <= tol_v && dv.abs() <= tol_dv)
        .map(|(_, &x)| x)
        .collect();
    cluster(&hits, MERGE_CELLS * grid_spacing(xs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

/// `V_λ u` on the nodes whose mirror image `2λ − x` lies in the grid.
pub fn reflect(snapshot: &Snapshot, lambda: f64) -> Result<Reflection, SturmError> {
    let grid = snapshot.grid;
    let l = grid.half_width;
    let (a, b) = ((2.0 * lambda - l).max(-l), (2.0 * lambda + l).min(l));
    let eps = 1e-9 * grid.dx;
    let u = &snapshot.u;
    let at = |y: f64| {
        let pos = (y + l) / grid.dx;
        let r = pos.round();
        if (pos - r).abs() < 1e-9 {
            return u[r.clamp(0.0, (grid.n - 1) as f64) as usize];
        }
        let i = (pos.floor() as usize).min(grid.n - 2);
        let s = pos - i as f64;
        u[i] + s * (u[i + 1] - u[i])
    };
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for i in 0..grid.n {
        let x = grid.x(i);
        if x < a - eps || x > b + eps {
            continue;
        }
        xs.push(x);
        values.push(at(2.0 * lambda - x) - u[i]);
    }
    if xs.len() < 2 {
        return Err(SturmError::EmptyOverlap { lambda });
    }
    Ok(Reflection { lambda, xs, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropLog {
    pub counts: Vec<(f64, usize)>,
    /// Pairs of consecutive times whose count increased.
    pub violations: Vec<(f64, f64)>,
    /// Strict drops with no tangency seen at either end (informational: the
    /// multiple zero may have occurred between snapshots).
    pub unexplained_drops: Vec<(f64, f64)>,
}

impl DropLog {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn audit_monotonicity(reports: &[(f64, ZeroReport)]) -> DropLog {
    let mut log = DropLog {
        counts: reports.iter().map(|(t, r)| (*t, r.count)).collect(),
        violations: Vec::new(),
        unexplained_drops: Vec::new(),
    };
    for w in reports.windows(2) {
        let ((t0, r0), (t1, r1)) = (&w[0], &w[1]);
        if r1.count > r0.count {
            log.violations.push((*t0, *t1));
        } else if r1.count < r0.count && r0.multiples.is_empty() && r1.multiples.is_empty() {
            log.unexplained_drops.push((*t0, *t1));
        }
    }
    log
}

/// Zero reports of `g(snapshot)` over a snapshot series, skipping snapshots
/// where the functional is inside the deadband everywhere.
pub fn track<G>(snapshots: &[Snapshot], interval: (f64, f64), g: G) -> Vec<(f64, ZeroReport)>
where
    G: Fn(&Snapshot) -> Vec<f64>,
{
    snapshots
        .iter()
        .filter_map(|s| {
            let xs = s.xs();
            zero_count(&g(s), &xs, interval, None).ok().map(|r| (s.t, r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcReport {
    pub holds: bool,
    pub holds_at: Option<f64>,
    pub count: Option<usize>,
    /// `None` where the count was undefined (inside the deadband).
    pub counts: Vec<(f64, Option<usize>)>,
    pub horizon: f64,
    pub reason: Option<String>,
}

fn interior(snapshot: &Snapshot) -> (f64, f64) {
    let g = snapshot.grid;
    (g.x(1), g.x(g.n - 2))
}

/// Finiteness of critical points: the zero count of `u_x` must become defined
/// and then stay constant up to the last snapshot.
pub fn check_nc(snapshots: &[Snapshot]) -> NcReport {
    let counts: Vec<(f64, Option<usize>)> = snapshots
        .iter()
        .map(|s| {
            let xs = s.xs();
            (s.t, zero_count(&s.ux, &xs, interior(s), None).ok().map(|r| r.count))
        })
        .collect();
    let horizon = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let last = counts.last().and_then(|c| c.1);
    let Some(last) = last else {
        return NcReport {
            holds: false,
            holds_at: None,
            count: None,
            counts,
            horizon,
            reason: Some("u_x is inside the deadband at the last snapshot".into()),
        };
    };
    let mut start = counts.len() - 1;
    while start > 0 && counts[start - 1].1 == Some(last) {
        start -= 1;
    }
    let stable_run = counts.len() - start;
    let holds = stable_run >= 2 || counts.len() == 1;
    NcReport {
        holds,
        holds_at: holds.then_some(counts[start].0),
        count: Some(last),
        reason: (!holds).then(|| "critical-point count still changing at the horizon".into()),
        counts,
        horizon,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RLambdaReport {
    pub lambda: f64,
    pub defined_at: Option<f64>,
    pub count: Option<usize>,
    /// Sign changes exist below the deadband, so the count is a lower bound.
    pub resolution_limited: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RReport {
    pub holds: bool,
    pub horizon: f64,
    pub per_lambda: Vec<RLambdaReport>,
}

/// `±{10, 15, …}` up to `L − 10`.
pub fn default_lambdas(half_width: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut lam = 10.0;
    while lam <= half_width - 10.0 + 1e-9 {
        out.push(-lam);
        out.push(lam);
        lam += 5.0;
    }
    out.sort_by(f64::total_cmp);
    out
}

fn raw_sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Finiteness of reflected zeros: for each λ, the earliest snapshot where the
/// zero count of `V_λ u` is defined. Holds up to the horizon if every λ has one.
pub fn check_r(snapshots: &[Snapshot], lambdas: &[f64]) -> RReport {
    let horizon = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let per_lambda: Vec<RLambdaReport> = lambdas
        .iter()
        .map(|&lambda| {
            let mut error = None;
            for s in snapshots {
                match reflect(s, lambda) {
                    Err(e) => {
                        return RLambdaReport {
                            lambda,
                            defined_at: None,
                            count: None,
                            resolution_limited: false,
                            error: Some(e.to_string()),
                        }
                    }
                    Ok(r) => {
                        let ends = (r.xs[0], r.xs[r.xs.len() - 1]);
                        match zero_count(&r.values, &r.xs, ends, None) {
                            Ok(rep) => {
                                let raw = raw_sign_changes(&r.values);
                                return RLambdaReport {
                                    lambda,
                                    defined_at: Some(s.t),
                                    count: Some(rep.count),
                                    resolution_limited: raw > rep.count + 2 * rep.multiples.len(),
                                    error: None,
                                };
                            }
                            Err(e) => error = Some(e.to_string()),
                        }
                    }
                }
            }
            RLambdaReport {
                lambda,
                defined_at: None,
                count: None,
                resolution_limited: false,
                error,
            }
        })
        .collect();
    RReport {
        holds: !per_lambda.is_empty() && per_lambda.iter().all(|r| r.count.is_some()),
        horizon,
        per_lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Grid;

    fn grid_values(a: f64, b: f64, n: usize, g: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        let v = xs.iter().map(|&x| g(x)).collect();
        (xs, v)
    }

    #[test]
    fn sine_has_three_zeros() {
        let (xs, v) = grid_values(0.0, 10.0, 1001, f64::sin);
        let r = zero_count(&v, &xs, (0.0, 10.0), Some(1e-9)).unwrap();
        assert_eq!(r.count, 3);
        for (loc, k) in r.locations.iter().zip(1..) {
            assert!((loc - k as f64 * std::f64::consts::PI).abs() < 1e-4);
        }
    }

    #[test]
    fn constant_and_zero() {
        let (xs, v) = grid_values(0.0, 1.0, 11, |_| 1.0);
        assert_eq!(zero_count(&v, &xs, (0.0, 1.0), None).unwrap().count, 0);
        let zeros = vec![0.0; 11];
        assert!(matches!(
            zero_count(&zeros, &xs, (0.0, 1.0), None),
            Err(SturmError::AllBelowTol { .. })
        ));
    }

    #[test]
    fn tangency_is_not_counted() {
        let (xs, v) = grid_values(-1.0, 1.0, 201, |x| x * x);
        let r = zero_count(&v, &xs, (-1.0, 1.0), Some(1e-3)).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.multiples.len(), 1);
        assert!(r.multiples[0].abs() < 1e-12);
    }

    #[test]
    fn multiples_of_square_and_line() {
        let (xs, v) = grid_values(-1.0, 1.0, 201, |x| x * x);
        let dv: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let hits = detect_multiple(&v, &dv, &xs, 1e-6, 1e-6);
        assert_eq!(hits, vec![0.0]);
        let (xs, v) = grid_values(-1.0, 1.0, 201, |x| x);
        let dv = vec![1.0; xs.len()];
        assert!(detect_multiple(&v, &dv, &xs, 1e-6, 1e-6).is_empty());
    }

    #[test]
    fn reflection_is_odd() {
        let grid = Grid::new(10.0, 0.1).unwrap();
        let s = Snapshot::from_fn(0.0, grid, |x| (0.3 * x).sin() + 0.1 * x * x);
        let r = reflect(&s, 1.5).unwrap();
        let at = |x: f64| r.values[r.xs.iter().position(|&y| (y - x).abs() < 1e-9).unwrap()];
        assert_eq!(at(1.5), 0.0);
        for h in [0.1, 0.7, 3.2] {
            assert!((at(1.5 + h) + at(1.5 - h)).abs() < 1e-12);
        }
        assert!(matches!(reflect(&s, 10.0), Err(SturmError::EmptyOverlap { .. })));
    }

    #[test]
    fn monotone_audit_examples() {
        let rep = |count| ZeroReport {
            interval: (0.0, 1.0),
            count,
            locations: vec![0.5; count],
            multiples: Vec::new(),
            tol_band: 0.0,
        };
        let series: Vec<(f64, ZeroReport)> = [5, 5, 3, 3, 1]
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as f64, rep(c)))
            .collect();
        assert!(audit_monotonicity(&series).is_monotone());
        let series = vec![(0.0, rep(2)), (1.0, rep(3))];
        assert_eq!(audit_monotonicity(&series).violations, vec![(0.0, 1.0)]);
    }

    #[test]
    fn default_lambda_grid() {
        assert_eq!(default_lambdas(30.0), vec![-20.0, -15.0, -10.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn zero_snapshot_fails_r() {
        let grid = Grid::new(30.0, 0.1).unwrap();
        let s = Snapshot::from_fn(0.0, grid, |_| 0.0);
        let r = check_r(&[s], &default_lambdas(30.0));
        assert!(!r.holds);
        assert!(r.per_lambda.iter().all(|p| p.count.is_none()));
    }
}
