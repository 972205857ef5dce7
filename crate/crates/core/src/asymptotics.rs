//! Long-time audits: spatial trajectories against the phase-plane census,
//! ω-limit estimates on a probe window, boundary limits and verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::Nonlinearity;
use crate::pde::{boundary_theta, residual, Snapshot};
use crate::phase_plane::{Census, Membership, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("tail has {available} snapshots, need at least {required}")]
    TailTooShort { available: usize, required: usize },
    #[error("trajectory straddles components at {} point(s)", points.len())]
    Straddle { points: Vec<(f64, f64)> },
    #[error("estimate is not settled (ut_metric = {ut_metric})")]
    Unsettled { ut_metric: f64 },
}

pub const MIN_TAIL: usize = 4;

fn default_chain_tol() -> f64 {
    5e-2
}
fn default_ut_tol() -> f64 {
    1e-3
}
fn default_steady_tol() -> f64 {
    1e-4
}
fn default_probe_window() -> f64 {
    20.0
}
fn default_tail_fraction() -> f64 {
    0.25
}
fn default_band() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictTolerances {
    #[serde(default = "default_chain_tol")]
    pub chain_tol: f64,
    #[serde(default = "default_ut_tol")]
    pub ut_tol: f64,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "default_probe_window")]
    pub probe_window: f64,
    /// Fraction of the time horizon treated as the tail.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// Boundary band for component membership.
    #[serde(default = "default_band")]
    pub band: f64,
    /// Snapshots with `t ≤ early_until` form the early (α-side) window;
    /// defaults to 5% of the horizon.
    #[serde(default)]
    pub early_until: Option<f64>,
    /// Snapshots with `t ≥ late_from` form the late (ω-side) window;
    /// defaults to 75% of the horizon.
    #[serde(default)]
    pub late_from: Option<f64>,
}

impl Default for VerdictTolerances {
    fn default() -> Self {
        Self {
            chain_tol: default_chain_tol(),
            ut_tol: default_ut_tol(),
            steady_tol: default_steady_tol(),
            probe_window: default_probe_window(),
            tail_fraction: default_tail_fraction(),
            band: default_band(),
            early_until: None,
            late_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialTrajectory {
    pub source_time: f64,
    pub points: Vec<(f64, f64)>,
}

/// Interior `(u, u_x)` pairs of a snapshot.
pub fn spatial_trajectory(snapshot: &Snapshot) -> SpatialTrajectory {
    let n = snapshot.u.len();
    SpatialTrajectory {
        source_time: snapshot.t,
        points: (1..n - 1).map(|i| (snapshot.u[i], snapshot.ux[i])).collect(),
    }
}

/// Trajectory of the part of the snapshot on `[−w, w]`.
pub fn windowed_trajectory(snapshot: &Snapshot, w: f64) -> SpatialTrajectory {
    spatial_trajectory(&snapshot.restrict(w))
}

pub fn dist_to_chain(census: &Census, trajectory: &SpatialTrajectory, chain: usize) -> f64 {
    census
        .chain_curve(chain)
        .sup_distance(&census.potential, &trajectory.points)
}

pub fn dist_to_loop(census: &Census, trajectory: &SpatialTrajectory, loop_id: usize) -> f64 {
    census
        .loop_curve(loop_id)
        .sup_distance(&census.potential, &trajectory.points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Location {
    Component(usize),
    /// Every point sits in the band of one trivial chain.
    OnChain(usize),
}

/// The component containing every trajectory point outside the boundary band.
pub fn locate_component(
    census: &Census,
    trajectory: &SpatialTrajectory,
    band: f64,
) -> Result<Location, AsymptoticsError> {
    let mut found: Option<usize> = None;
    let mut offending = Vec::new();
    let mut band_chains: Option<Vec<usize>> = None;
    for &(u, v) in &trajectory.points {
        let near: Vec<usize> = census
            .chains
            .iter()
            .filter(|c| census.distance_to_chain(c.id, u, v) <= band)
            .map(|c| c.id)
            .collect();
        if !near.is_empty() {
            band_chains = Some(match band_chains {
                None => near,
                Some(prev) => prev.into_iter().filter(|c| near.contains(c)).collect(),
            });
            continue;
        }
        let home = census
            .components
            .iter()
            .find(|c| census.membership(u, v, Region::Component(c.id), 0.0) == Membership::Inside)
            .map(|c| c.id);
        match (home, found) {
            (None, _) => offending.push((u, v)),
            (Some(h), None) => found = Some(h),
            (Some(h), Some(f)) if h != f => offending.push((u, v)),
            _ => {}
        }
    }
    if !offending.is_empty() {
        return Err(AsymptoticsError::Straddle { points: offending });
    }
    if let Some(id) = found {
        return Ok(Location::Component(id));
    }
    let trivial = band_chains
        .unwrap_or_default()
        .into_iter()
        .find(|&c| census.chains[c].trivial);
    match trivial {
        Some(c) => Ok(Location::OnChain(c)),
        None => Err(AsymptoticsError::Straddle {
            points: trajectory.points.clone(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaEstimate {
    pub probe_window: f64,
    pub sample_times: Vec<f64>,
    pub profiles: Vec<Snapshot>,
    /// Largest sup-distance between consecutive tail profiles.
    pub settle_metric: f64,
    /// Largest `sup |u_xx + f(u)|` (the time derivative) over the tail.
    pub ut_metric: f64,
}

impl OmegaEstimate {
    pub fn is_settled(&self, tols: &VerdictTolerances) -> bool {
        self.ut_metric <= tols.ut_tol
    }

    pub fn trajectories(&self) -> Vec<SpatialTrajectory> {
        self.profiles.iter().map(spatial_trajectory).collect()
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn estimate_omega(
    snapshots: &[Snapshot],
    f: &Nonlinearity,
    probe_window: f64,
    tail_fraction: f64,
) -> Result<OmegaEstimate, AsymptoticsError> {
    let (first, last) = match (snapshots.first(), snapshots.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => {
            return Err(AsymptoticsError::TailTooShort {
                available: 0,
                required: MIN_TAIL,
            })
        }
    };
    let from = last - tail_fraction * (last - first);
    let profiles: Vec<Snapshot> = snapshots
        .iter()
        .filter(|s| s.t >= from)
        .map(|s| s.restrict(probe_window))
        .collect();
    if profiles.len() < MIN_TAIL {
        return Err(AsymptoticsError::TailTooShort {
            available: profiles.len(),
            required: MIN_TAIL,
        });
    }
    let settle_metric = profiles
        .windows(2)
        .map(|w| sup_diff(&w[0].u, &w[1].u))
        .fold(0.0, f64::max);
    let ut_metric = profiles.iter().map(|p| residual(p, f)).fold(0.0, f64::max);
    Ok(OmegaEstimate {
        probe_window,
        sample_times: profiles.iter().map(|p| p.t).collect(),
        profiles,
        settle_metric,
        ut_metric,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLimits {
    /// Largest deviation of the boundary values from the boundary ODE.
    pub path_error: f64,
    /// Boundary values at the last snapshot.
    pub theta_minus: f64,
    pub theta_plus: f64,
    /// Long-time limits of the boundary ODE from the initial boundary values.
    pub limit_minus: Option<f64>,
    pub limit_plus: Option<f64>,
    /// Whether each limit is a stable zero of f (f' < 0).
    pub stable_minus: Option<bool>,
    pub stable_plus: Option<bool>,
    pub beta: Option<(f64, f64)>,
    /// β₋ < θ < β₊ for both limits.
    pub between_beta: Option<bool>,
}

/// Horizon used to extrapolate the boundary ODE to its limit.
const THETA_HORIZON: f64 = 1e3;

fn ode_limit(census: &Census, theta0: f64) -> Option<f64> {
    boundary_theta(&census.f, theta0, THETA_HORIZON, 0.01).ok().map(|theta| {
        census
            .equilibria
            .iter()
            .map(|e| e.value)
            .min_by(|a, b| (a - theta).abs().total_cmp(&(b - theta).abs()))
            .filter(|z| (z - theta).abs() < 1e-6)
            .unwrap_or(theta)
    })
}

/// Compares boundary values against the boundary ODE (stepped at `max_step`)
/// and extrapolates its limits; `chain` adds the `β₋ < θ < β₊` check.
pub fn theta_limits(snapshots: &[Snapshot], census: &Census, max_step: f64, chain: Option<usize>) -> ThetaLimits {
    let f = &census.f;
    let first = &snapshots[0];
    let last = &snapshots[snapshots.len() - 1];
    let n = first.u.len();
    let (l0, r0) = (first.u[0], first.u[n - 1]);
    let mut path_error: f64 = 0.0;
    for s in snapshots {
        for (theta0, got) in [(l0, s.u[0]), (r0, s.u[n - 1])] {
            match boundary_theta(f, theta0, s.t, max_step) {
                Ok(expected) => path_error = path_error.max((expected - got).abs()),
                Err(_) => path_error = f64::INFINITY,
            }
        }
    }
    let (limit_minus, limit_plus) = (ode_limit(census, l0), ode_limit(census, r0));
    let stable = |th: Option<f64>| th.map(|t| f.derivative(t) < 0.0);
    let beta = chain
        .filter(|&c| !census.chains[c].trivial)
        .map(|c| census.beta_pm(c));
    let between_beta = match (beta, limit_minus, limit_plus) {
        (Some((lo, hi)), Some(a), Some(b)) => Some(lo < a && a < hi && lo < b && b < hi),
        _ => None,
    };
    ThetaLimits {
        path_error,
        theta_minus: last.u[0],
        theta_plus: last.u[n - 1],
        limit_minus,
        limit_plus,
        stable_minus: stable(limit_minus),
        stable_plus: stable(limit_plus),
        beta,
        between_beta,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictKind {
    /// `converged` records whether consecutive tail profiles also agree to
    /// `steady_tol`.
    QuasiconvergentToChain { chain_id: usize, converged: bool },
    Steady { chain_id: usize },
    /// Early trajectories near the inner chain, late ones near the outer loop
    /// (forward-run proxy for an entire connecting solution).
    Connecting {
        pi_id: usize,
        inner_chain: usize,
        outer_loop: Option<usize>,
    },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub distances: BTreeMap<String, f64>,
    pub theta_limits: Option<ThetaLimits>,
    pub tolerances: VerdictTolerances,
    pub probe_window: f64,
    pub horizon: f64,
}

impl Verdict {
    pub fn chain_id(&self) -> Option<usize> {
        match self.kind {
            VerdictKind::QuasiconvergentToChain { chain_id, .. } | VerdictKind::Steady { chain_id } => {
                Some(chain_id)
            }
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            VerdictKind::QuasiconvergentToChain { .. } => "quasiconvergent_to_chain",
            VerdictKind::Steady { .. } => "steady",
            VerdictKind::Connecting { .. } => "connecting",
            VerdictKind::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Largest distance from each tail trajectory to every chain.
fn chain_distances(census: &Census, trajectories: &[SpatialTrajectory]) -> Vec<f64> {
    census
        .chains
        .iter()
        .map(|c| {
            trajectories
                .iter()
                .map(|t| dist_to_chain(census, t, c.id))
                .fold(0.0, f64::max)
        })
        .collect()
}

fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

pub fn quasiconvergence_verdict(est: &OmegaEstimate, census: &Census, tols: &VerdictTolerances) -> Verdict {
    let mut distances = BTreeMap::new();
    distances.insert("settle_metric".to_string(), est.settle_metric);
    distances.insert("ut_metric".to_string(), est.ut_metric);
    let horizon = est.sample_times.last().copied().unwrap_or(0.0);
    let make = |kind, distances| Verdict {
        kind,
        distances,
        theta_limits: None,
        tolerances: *tols,
        probe_window: est.probe_window,
        horizon,
    };
    if est.ut_metric > tols.ut_tol {
        return make(
            VerdictKind::Inconclusive {
                reason: format!("tail unsettled: ut_metric {:.3e} > {:.3e}", est.ut_metric, tols.ut_tol),
            },
            distances,
        );
    }
    let per_chain = chain_distances(census, &est.trajectories());
    for (id, d) in per_chain.iter().enumerate() {
        distances.insert(format!("chain_{id}"), *d);
    }
    let best = argmin(&per_chain);
    match best {
        Some(id) if per_chain[id] <= tols.chain_tol => make(
            VerdictKind::QuasiconvergentToChain {
                chain_id: id,
                converged: est.settle_metric <= tols.steady_tol,
            },
            distances,
        ),
        _ => make(
            VerdictKind::Inconclusive {
                reason: "no single chain within chain_tol of every tail trajectory".into(),
            },
            distances,
        ),
    }
}

pub fn connection_verdict(
    snapshots: &[Snapshot],
    component: usize,
    census: &Census,
    tols: &VerdictTolerances,
) -> Verdict {
    let horizon = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let start = snapshots.first().map(|s| s.t).unwrap_or(0.0);
    let early_until = tols.early_until.unwrap_or(start + 0.05 * (horizon - start));
    let late_from = tols.late_from.unwrap_or(start + 0.75 * (horizon - start));
    let comp = &census.components[component];
    let w = tols.probe_window;
    let mut distances = BTreeMap::new();
    let make = |kind, distances| Verdict {
        kind,
        distances,
        theta_limits: None,
        tolerances: *tols,
        probe_window: w,
        horizon,
    };

    let max_residual = snapshots
        .iter()
        .map(|s| residual(&s.restrict(w), &census.f))
        .fold(0.0, f64::max);
    distances.insert("max_residual".to_string(), max_residual);
    if !snapshots.is_empty() && max_residual <= tols.steady_tol {
        let traj = windowed_trajectory(&snapshots[snapshots.len() - 1], w);
        let per_chain = chain_distances(census, std::slice::from_ref(&traj));
        if let Some(id) = argmin(&per_chain) {
            distances.insert("chain_distance".to_string(), per_chain[id]);
            return make(VerdictKind::Steady { chain_id: id }, distances);
        }
    }

    let early: Vec<SpatialTrajectory> = snapshots
        .iter()
        .filter(|s| s.t <= early_until)
        .map(|s| windowed_trajectory(s, w))
        .collect();
    let late: Vec<SpatialTrajectory> = snapshots
        .iter()
        .filter(|s| s.t >= late_from)
        .map(|s| windowed_trajectory(s, w))
        .collect();
    if early.is_empty() || late.is_empty() {
        return make(
            VerdictKind::Inconclusive {
                reason: "early or late window holds no snapshots".into(),
            },
            distances,
        );
    }
    let d_early = early
        .iter()
        .map(|t| dist_to_chain(census, t, comp.inner_chain))
        .fold(0.0, f64::max);
    distances.insert("early_to_inner_chain".to_string(), d_early);
    let Some(outer) = comp.outer_loop else {
        return make(
            VerdictKind::Inconclusive {
                reason: "component has no outer loop".into(),
            },
            distances,
        );
    };
    let d_late = late
        .iter()
        .map(|t| dist_to_loop(census, t, outer))
        .fold(0.0, f64::max);
    distances.insert("late_to_outer_loop".to_string(), d_late);
    if d_early <= tols.chain_tol && d_late <= tols.chain_tol {
        make(
            VerdictKind::Connecting {
                pi_id: component,
                inner_chain: comp.inner_chain,
                outer_loop: comp.outer_loop,
            },
            distances,
        )
    } else {
        make(
            VerdictKind::Inconclusive {
                reason: format!(
                    "early distance {d_early:.3e} or late distance {d_late:.3e} exceeds chain_tol {:.3e}",
                    tols.chain_tol
                ),
            },
            distances,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseGroup {
    pub chain_id: usize,
    pub times: Vec<f64>,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorsePartition {
    /// Nonempty groups, innermost chain first.
    pub groups: Vec<MorseGroup>,
}

/// Assigns each tail profile to its nearest chain.
pub fn morse_partition(
    est: &OmegaEstimate,
    census: &Census,
    tols: &VerdictTolerances,
) -> Result<MorsePartition, AsymptoticsError> {
    if !est.is_settled(tols) {
        return Err(AsymptoticsError::Unsettled {
            ut_metric: est.ut_metric,
        });
    }
    let mut groups: BTreeMap<usize, MorseGroup> = BTreeMap::new();
    for traj in est.trajectories() {
        let d: Vec<f64> = census
            .chains
            .iter()
            .map(|c| dist_to_chain(census, &traj, c.id))
            .collect();
        let Some(id) = argmin(&d) else { continue };
        let g = groups.entry(id).or_insert(MorseGroup {
            chain_id: id,
            times: Vec::new(),
            max_distance: 0.0,
        });
        g.times.push(traj.source_time);
        g.max_distance = g.max_distance.max(d[id]);
    }
    let mut groups: Vec<MorseGroup> = groups.into_values().collect();
    // Inclusion implies strictly lower energy, so energy order extends it.
    groups.sort_by(|a, b| {
        census.chains[a.chain_id]
            .energy
            .total_cmp(&census.chains[b.chain_id].energy)
    });
    Ok(MorsePartition { groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeExitCheck {
    pub interval: (f64, f64),
    pub exit_tol: f64,
    pub examined: usize,
    pub exiting: usize,
    pub max_residual: f64,
    pub holds: bool,
}

/// Tail profiles whose range reaches within `exit_tol` of the ends of
/// `interval` (or beyond) must be near-steady: residual ≤ `residual_tol`.
pub fn near_steady_outside(
    est: &OmegaEstimate,
    f: &Nonlinearity,
    interval: (f64, f64),
    exit_tol: f64,
    residual_tol: f64,
) -> RangeExitCheck {
    let mut exiting = 0;
    let mut max_residual: f64 = 0.0;
    for p in &est.profiles {
        let lo = p.u.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo <= interval.0 + exit_tol || hi >= interval.1 - exit_tol {
            exiting += 1;
            max_residual = max_residual.max(residual(p, f));
        }
    }
    RangeExitCheck {
        interval,
        exit_tol,
        examined: est.profiles.len(),
        exiting,
        max_residual,
        holds: max_residual <= residual_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{mf_extend, AnalysisSettings};
    use crate::pde::Grid;

    fn cubic_census() -> Census {
        let s = AnalysisSettings::default();
        let base = Nonlinearity::preset("cubic_bistable", (-2.0, 2.0)).unwrap();
        let f = mf_extend(&base, 2.0, 0.5, &s).unwrap().f;
        Census::build(&f, &s).unwrap()
    }

    fn big_chain(c: &Census) -> usize {
        c.chains.iter().find(|ch| !ch.trivial).unwrap().id
    }

    #[test]
    fn zero_profile_trajectory() {
        let grid = Grid::new(5.0, 0.1).unwrap();
        let s = Snapshot::from_fn(0.0, grid, |_| 0.0);
        let t = spatial_trajectory(&s);
        assert_eq!(t.points.len(), grid.n - 2);
        assert!(t.points.iter().all(|&p| p == (0.0, 0.0)));
    }

    #[test]
    fn front_lies_on_the_big_chain() {
        let c = cubic_census();
        let grid = Grid::new(20.0, 0.005).unwrap();
        let s = Snapshot::from_fn(0.0, grid, |x| (x / 2f64.sqrt()).tanh());
        let traj = spatial_trajectory(&s);
        for &(u, v) in traj.points.iter().step_by(50) {
            assert!((c.hamiltonian(u, v) - 0.25).abs() < 1e-4);
        }
        assert!(dist_to_chain(&c, &traj, big_chain(&c)) < 2e-3);
        assert!(matches!(
            locate_component(&c, &traj, 1e-3),
            Err(AsymptoticsError::Straddle { .. })
        ));
    }

    #[test]
    fn zero_profile_sits_on_the_inner_chain() {
        let c = cubic_census();
        let grid = Grid::new(5.0, 0.1).unwrap();
        let traj = spatial_trajectory(&Snapshot::from_fn(0.0, grid, |_| 0.0));
        let origin = c.chains.iter().find(|ch| ch.trivial && ch.p.abs() < 1e-9).unwrap().id;
        assert_eq!(locate_component(&c, &traj, 1e-3), Ok(Location::OnChain(origin)));
    }

    #[test]
    fn small_bump_lies_in_the_central_component() {
        let c = cubic_census();
        let origin = c.chains.iter().find(|ch| ch.trivial && ch.p.abs() < 1e-9).unwrap().id;
        let grid = Grid::new(20.0, 0.01).unwrap();
        let s = Snapshot::from_fn(0.0, grid, |x| 0.4 * (-x * x / 4.0).exp());
        let traj = spatial_trajectory(&s);
        assert_eq!(locate_component(&c, &traj, 1e-3), Ok(Location::Component(origin)));
    }

    #[test]
    fn short_tail_is_refused() {
        let c = cubic_census();
        let grid = Grid::new(5.0, 0.1).unwrap();
        let snaps: Vec<Snapshot> = (0..3).map(|k| Snapshot::from_fn(k as f64, grid, |_| 0.0)).collect();
        assert!(matches!(
            estimate_omega(&snaps, &c.f, 20.0, 1.0),
            Err(AsymptoticsError::TailTooShort { .. })
        ));
    }

    #[test]
    fn two_chain_synthetic_partition_is_ordered() {
        let c = cubic_census();
        let grid = Grid::new(20.0, 0.005).unwrap();
        let zero = Snapshot::from_fn(0.0, grid, |_| 0.0);
        let front = Snapshot::from_fn(1.0, grid, |x| (x / 2f64.sqrt()).tanh());
        let est = OmegaEstimate {
            probe_window: 20.0,
            sample_times: vec![0.0, 1.0],
            profiles: vec![zero, front],
            settle_metric: 1.0,
            ut_metric: 0.0,
        };
        let part = morse_partition(&est, &c, &VerdictTolerances::default()).unwrap();
        assert_eq!(part.groups.len(), 2);
        assert!(c.order.inside(part.groups[0].chain_id, part.groups[1].chain_id));
        let unsettled = OmegaEstimate { ut_metric: 1.0, ..est };
        assert!(morse_partition(&unsettled, &c, &VerdictTolerances::default()).is_err());
    }
}
