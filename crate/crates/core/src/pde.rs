//! Strang-split IMEX solver for `u_t = u_xx + f(u)` on `[−L, L]`.
//!
//! Each step is reaction (RK4, dt/2) → diffusion (Crank–Nicolson) → reaction
//! (RK4, dt/2). Boundary nodes only see the reaction substeps, so in
//! `ode_driven` mode they follow `θ' = f(θ)` exactly as `boundary_theta` does.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::{rk4_step, Nonlinearity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("value {value} left the window at t = {t}, x = {x}")]
    NonFinite { t: f64, x: f64, value: f64 },
    #[error("boundary ODE left the window at t = {t}: theta = {theta}")]
    Blowup { t: f64, theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    #[default]
    OdeDriven,
    FrozenDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

fn default_sign_pattern() -> Vec<f64> {
    vec![1.0]
}

fn default_center() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `width` is split into one smooth lobe per `sign_pattern` entry; each lobe
    /// peaks at `amplitude · sign`.
    CompactBump {
        center: f64,
        width: f64,
        amplitude: f64,
        #[serde(default = "default_sign_pattern")]
        sign_pattern: Vec<f64>,
    },
    BumpTrain {
        bumps: Vec<Bump>,
    },
    /// `(l + r)/2 + (r − l)/2 · tanh(steepness · (x − center))`.
    StepFront {
        level_left: f64,
        level_right: f64,
        steepness: f64,
        #[serde(default = "default_center")]
        center: f64,
    },
    /// `tanh((x − shift)/scale)`.
    TanhProfile { shift: f64, scale: f64 },
    /// `M e^x` for `x < −k`, `e^{−x}(M + sin x)` for `x > k`, linear in between;
    /// its reflection about 0 oscillates forever.
    ReflectionFixture { m: f64, k: f64 },
    ExplicitSamples { x: Vec<f64>, u: Vec<f64> },
}

/// C∞ bump with peak 1 at 0 and support `[−1, 1]`.
fn smooth_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn single_bump(x: f64, b: &Bump) -> f64 {
    b.amplitude * smooth_bump((x - b.center) / (0.5 * b.width))
}

impl InitialData {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            InitialData::CompactBump {
                center,
                width,
                amplitude,
                sign_pattern,
            } => {
                let n = sign_pattern.len().max(1);
                let lobe = width / n as f64;
                let left = center - 0.5 * width;
                let j = ((x - left) / lobe).floor();
                if j < 0.0 || j >= n as f64 {
                    return 0.0;
                }
                let j = j as usize;
                let sign = sign_pattern.get(j).copied().unwrap_or(1.0);
                let c = left + (j as f64 + 0.5) * lobe;
                amplitude * sign * smooth_bump((x - c) / (0.5 * lobe))
            }
            InitialData::BumpTrain { bumps } => bumps.iter().map(|b| single_bump(x, b)).sum(),
            InitialData::StepFront {
                level_left,
                level_right,
                steepness,
                center,
            } => {
                0.5 * (level_left + level_right)
                    + 0.5 * (level_right - level_left) * (steepness * (x - center)).tanh()
            }
            InitialData::TanhProfile { shift, scale } => ((x - shift) / scale).tanh(),
            InitialData::ReflectionFixture { m, k } => reflection_fixture(*m, *k, x),
            InitialData::ExplicitSamples { x: xs, u } => interpolate(xs, u, x),
        }
    }

    /// Closed support for compactly supported kinds.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            InitialData::CompactBump { center, width, .. } => {
                Some((center - 0.5 * width, center + 0.5 * width))
            }
            InitialData::BumpTrain { bumps } => {
                let lo = bumps
                    .iter()
                    .map(|b| b.center - 0.5 * b.width)
                    .fold(f64::INFINITY, f64::min);
                let hi = bumps
                    .iter()
                    .map(|b| b.center + 0.5 * b.width)
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo <= hi).then_some((lo, hi))
            }
            _ => None,
        }
    }

    /// Kinds that vanish at ±∞.
    pub fn is_localized(&self) -> bool {
        matches!(
            self,
            InitialData::CompactBump { .. }
                | InitialData::BumpTrain { .. }
                | InitialData::ReflectionFixture { .. }
        )
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            InitialData::CompactBump {
                width, sign_pattern, ..
            } => {
                if *width <= 0.0 {
                    return Err("compact_bump width must be positive".into());
                }
                if sign_pattern.is_empty() {
                    return Err("compact_bump sign_pattern must not be empty".into());
                }
            }
            InitialData::BumpTrain { bumps } => {
                if bumps.iter().any(|b| b.width <= 0.0) {
                    return Err("bump_train widths must be positive".into());
                }
            }
            InitialData::TanhProfile { scale, .. } if *scale == 0.0 => {
                return Err("tanh_profile scale must be nonzero".into());
            }
            InitialData::ExplicitSamples { x, u } => {
                if x.len() != u.len() || x.len() < 2 {
                    return Err("explicit_samples needs matching x/u with at least two points".into());
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("explicit_samples x must be strictly increasing".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

pub fn reflection_fixture(m: f64, k: f64, x: f64) -> f64 {
    let right = |x: f64| (-x).exp() * (m + x.sin());
    if x < -k {
        m * x.exp()
    } else if x > k {
        right(x)
    } else {
        let a = m * (-k).exp();
        let b = right(k);
        a + (b - a) * (x + k) / (2.0 * k)
    }
}

fn interpolate(xs: &[f64], us: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return us[0];
    }
    if i >= xs.len() {
        return us[us.len() - 1];
    }
    let s = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    us[i - 1] + s * (us[i] - us[i - 1])
}

/// Uniform grid `x_i = −L + i·dx`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(half_width: f64, dx: f64) -> Result<Self, SolverError> {
        if !(half_width > 0.0 && dx > 0.0) {
            return Err(SolverError::InvalidConfig(
                "half_width and dx must be positive".into(),
            ));
        }
        let cells = 2.0 * half_width / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-8 * cells.max(1.0) || rounded < 4.0 {
            return Err(SolverError::InvalidConfig(format!(
                "dx = {dx} does not divide 2L = {}",
                2.0 * half_width
            )));
        }
        Ok(Self {
            half_width,
            dx,
            n: rounded as usize + 1,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x + self.half_width) / self.dx).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub grid: Grid,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub uxx: Vec<f64>,
}

impl Snapshot {
    /// Builds a snapshot and its finite-difference derivatives (central inside,
    /// second-order one-sided at the edges).
    pub fn new(t: f64, grid: Grid, u: Vec<f64>) -> Self {
        assert_eq!(u.len(), grid.n, "snapshot length must match the grid");
        let (ux, uxx) = derivatives(&u, grid.dx);
        Self { t, grid, u, ux, uxx }
    }

    pub fn from_fn(t: f64, grid: Grid, g: impl Fn(f64) -> f64) -> Self {
        let u = (0..grid.n).map(|i| g(grid.x(i))).collect();
        Self::new(t, grid, u)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.grid.xs()
    }

    /// The part of the snapshot on `[−w, w]`, keeping the parent's derivatives.
    pub fn restrict(&self, w: f64) -> Snapshot {
        let w = w.min(self.grid.half_width);
        let cells = (w / self.grid.dx).round() as usize;
        let mid = (self.grid.n - 1) / 2;
        let (lo, hi) = (mid - cells.min(mid), mid + cells.min(mid));
        Snapshot {
            t: self.t,
            grid: Grid {
                half_width: (hi - mid) as f64 * self.grid.dx,
                dx: self.grid.dx,
                n: hi - lo + 1,
            },
            u: self.u[lo..=hi].to_vec(),
            ux: self.ux[lo..=hi].to_vec(),
            uxx: self.uxx[lo..=hi].to_vec(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn derivatives(u: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut ux = vec![0.0; n];
    let mut uxx = vec![0.0; n];
    for i in 1..n - 1 {
        ux[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
        uxx[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
    }
    ux[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
    ux[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx);
    if n >= 4 {
        uxx[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (dx * dx);
        uxx[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / (dx * dx);
    } else {
        uxx[0] = uxx[1];
        uxx[n - 1] = uxx[n - 2];
    }
    (ux, uxx)
}

fn default_half_width() -> f64 {
    60.0
}
fn default_dx() -> f64 {
    0.01
}
fn default_dt() -> f64 {
    0.005
}
fn default_rannacher() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_dx")]
    pub dx: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Extra snapshots at every multiple of this interval.
    #[serde(default)]
    pub snapshot_every: Option<f64>,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
    /// Initial steps whose diffusion substep is two backward-Euler half-steps,
    /// damping the non-monotone Crank–Nicolson response to rough data.
    #[serde(default = "default_rannacher")]
    pub rannacher_steps: usize,
    pub initial: InitialData,
}

impl SolverConfig {
    pub fn new(t_end: f64, initial: InitialData) -> Self {
        Self {
            half_width: default_half_width(),
            dx: default_dx(),
            dt: default_dt(),
            t_end,
            snapshot_times: Vec::new(),
            snapshot_every: None,
            boundary_mode: BoundaryMode::default(),
            rannacher_steps: default_rannacher(),
            initial,
        }
    }

    pub fn grid(&self) -> Result<Grid, SolverError> {
        Grid::new(self.half_width, self.dx)
    }

    pub fn dt_max(f: &Nonlinearity) -> f64 {
        0.5 / f.lipschitz_bound()
    }

    pub fn step_count(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self, f: &Nonlinearity) -> Result<Grid, SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        let grid = self.grid()?;
        if !(self.dt > 0.0) {
            return bad("dt must be positive".into());
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and nonnegative".into());
        }
        let dt_max = Self::dt_max(f);
        if self.dt > dt_max {
            return bad(format!("dt = {} exceeds the reaction bound {dt_max}", self.dt));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("snapshot_times must be sorted".into());
        }
        if self
            .snapshot_times
            .iter()
            .any(|&t| !(0.0..=self.t_end + 0.5 * self.dt).contains(&t))
        {
            return bad("snapshot_times must lie in [0, t_end]".into());
        }
        if let Some(every) = self.snapshot_every {
            if !(every > 0.0) {
                return bad("snapshot_every must be positive".into());
            }
        }
        self.initial.validate().map_err(SolverError::InvalidConfig)?;
        if let Some((a, b)) = self.initial.support() {
            let l = self.half_width;
            if !(a > -l + 5.0 && b < l - 5.0) {
                return bad(format!(
                    "initial support [{a}, {b}] must lie inside (−L + 5, L − 5) = ({}, {})",
                    -l + 5.0,
                    l - 5.0
                ));
            }
        }
        let (lo, hi) = f.window();
        for i in 0..grid.n {
            let x = grid.x(i);
            let v = self.initial.evaluate(x);
            if !v.is_finite() || v < lo || v > hi {
                return bad(format!("initial value {v} at x = {x} is outside the window"));
            }
        }
        Ok(grid)
    }

    /// Step indices at which snapshots are emitted: 0, the requested times, the
    /// `snapshot_every` multiples and the final step.
    pub fn snapshot_steps(&self) -> BTreeSet<usize> {
        let n = self.step_count();
        let mut steps = BTreeSet::new();
        steps.insert(0);
        steps.insert(n);
        for &t in &self.snapshot_times {
            steps.insert(((t / self.dt).round() as usize).min(n));
        }
        if let Some(every) = self.snapshot_every {
            let mut k = 1.0;
            while k * every <= self.t_end + 0.5 * self.dt {
                steps.insert(((k * every / self.dt).round() as usize).min(n));
                k += 1.0;
            }
        }
        steps
    }
}

/// Classical RK4 for `θ' = f(θ)` up to time `t` with steps no longer than `max_step`.
pub fn boundary_theta(f: &Nonlinearity, theta0: f64, t: f64, max_step: f64) -> Result<f64, SolverError> {
    if t <= 0.0 {
        return Ok(theta0);
    }
    let steps = (t / max_step).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut theta = theta0;
    for k in 0..steps {
        theta = rk4_step(f, theta, h);
        if !theta.is_finite() || !f.contains(theta) {
            return Err(SolverError::Blowup {
                t: (k + 1) as f64 * h,
                theta,
            });
        }
    }
    Ok(theta)
}

/// Maximal front speed `2√Lip(f)`.
pub fn front_speed(f: &Nonlinearity) -> f64 {
    2.0 * f.lipschitz_bound().sqrt()
}

/// Earliest time a front launched from the initial support can reach `|x| = L − 5`.
pub fn front_arrival_time(cfg: &SolverConfig, f: &Nonlinearity) -> Option<f64> {
    let (a, b) = cfg.initial.support()?;
    let probe = cfg.half_width - 5.0;
    let gap = (probe - b).min(a + probe);
    Some(gap.max(0.0) / front_speed(f))
}

/// `sup |u_xx + f(u)|` over interior nodes.
pub fn residual(snapshot: &Snapshot, f: &Nonlinearity) -> f64 {
    let n = snapshot.u.len();
    (1..n - 1)
        .map(|i| (snapshot.uxx[i] + f.value(snapshot.u[i])).abs())
        .fold(0.0, f64::max)
}

/// Constant-coefficient tridiagonal system `−ρ y_{i−1} + (1 + 2ρ) y_i − ρ y_{i+1} = d_i`,
/// factored once.
#[derive(Debug, Clone)]
struct Tridiagonal {
    rho: f64,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl Tridiagonal {
    fn new(rho: f64, m: usize) -> Self {
        let a = -rho;
        let b = 1.0 + 2.0 * rho;
        let mut c_prime = vec![0.0; m];
        let mut inv_denom = vec![0.0; m];
        let mut prev = 0.0;
        for i in 0..m {
            let denom = b - a * prev;
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = a * inv_denom[i];
            prev = c_prime[i];
        }
        Self {
            rho,
            c_prime,
            inv_denom,
        }
    }

    fn solve(&self, d: &mut [f64]) {
        let a = -self.rho;
        let m = d.len();
        let mut prev = 0.0;
        for i in 0..m {
            d[i] = (d[i] - a * prev) * self.inv_denom[i];
            prev = d[i];
        }
        for i in (0..m - 1).rev() {
            d[i] -= self.c_prime[i] * d[i + 1];
        }
    }
}

pub struct Solver<'a> {
    f: &'a Nonlinearity,
    grid: Grid,
    dt: f64,
    mode: BoundaryMode,
    rannacher_left: usize,
    u: Vec<f64>,
    rhs: Vec<f64>,
    system: Tridiagonal,
    steps_taken: usize,
    t0: f64,
}

impl<'a> Solver<'a> {
    pub fn new(
        f: &'a Nonlinearity,
        grid: Grid,
        u: Vec<f64>,
        t0: f64,
        dt: f64,
        mode: BoundaryMode,
        rannacher_steps: usize,
    ) -> Self {
        assert_eq!(u.len(), grid.n);
        let rho = dt / (2.0 * grid.dx * grid.dx);
        let m = grid.n - 2;
        Self {
            f,
            grid,
            dt,
            mode,
            rannacher_left: rannacher_steps,
            u,
            rhs: vec![0.0; m],
            system: Tridiagonal::new(rho, m),
            steps_taken: 0,
            t0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.steps_taken as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::new(self.time(), self.grid, self.u.clone())
    }

    fn react(&mut self) {
        let h = 0.5 * self.dt;
        let n = self.u.len();
        let (lo, hi) = match self.mode {
            BoundaryMode::OdeDriven => (0, n),
            BoundaryMode::FrozenDirichlet => (1, n - 1),
        };
        for v in &mut self.u[lo..hi] {
            *v = rk4_step(self.f, *v, h);
        }
    }

    fn diffuse_once(&mut self, crank_nicolson: bool) {
        let rho = self.system.rho;
        let n = self.u.len();
        let u = &self.u;
        for i in 1..n - 1 {
            self.rhs[i - 1] = if crank_nicolson {
                u[i] + rho * (u[i - 1] - 2.0 * u[i] + u[i + 1])
            } else {
                u[i]
            };
        }
        self.rhs[0] += rho * u[0];
        let last = n - 3;
        self.rhs[last] += rho * u[n - 1];
        self.system.solve(&mut self.rhs);
        self.u[1..n - 1].copy_from_slice(&self.rhs);
    }

    pub fn step(&mut self) -> Result<(), SolverError> {
        self.react();
        if self.rannacher_left > 0 {
            self.rannacher_left -= 1;
            self.diffuse_once(false);
            self.diffuse_once(false);
        } else {
            self.diffuse_once(true);
        }
        self.react();
        self.steps_taken += 1;
        let t = self.time();
        let (lo, hi) = self.f.window();
        let n = self.u.len();
        for &i in &[0, n - 1] {
            let v = self.u[i];
            if !v.is_finite() || v < lo || v > hi {
                return Err(SolverError::Blowup { t, theta: v });
            }
        }
        if let Some(i) = self.u.iter().position(|v| !v.is_finite() || *v < lo || *v > hi) {
            return Err(SolverError::NonFinite {
                t,
                x: self.grid.x(i),
                value: self.u[i],
            });
        }
        Ok(())
    }
}

/// One solver step from an existing snapshot.
pub fn step(snapshot: &Snapshot, f: &Nonlinearity, dt: f64, mode: BoundaryMode) -> Result<Snapshot, SolverError> {
    let mut solver = Solver::new(f, snapshot.grid, snapshot.u.clone(), snapshot.t, dt, mode, 0);
    solver.step()?;
    Ok(solver.snapshot())
}

/// Runs the configured solve and hands each snapshot to `observer` as soon as
/// it is produced.
pub fn solve_with<O: FnMut(Snapshot)>(
    cfg: &SolverConfig,
    f: &Nonlinearity,
    mut observer: O,
) -> Result<(), SolverError> {
    let grid = cfg.validate(f)?;
    let u0 = (0..grid.n).map(|i| cfg.initial.evaluate(grid.x(i))).collect();
    let mut solver = Solver::new(f, grid, u0, 0.0, cfg.dt, cfg.boundary_mode, cfg.rannacher_steps);
    let wanted = cfg.snapshot_steps();
    let total = cfg.step_count();
    observer(solver.snapshot());
    for k in 1..=total {
        solver.step()?;
        if wanted.contains(&k) {
            observer(solver.snapshot());
        }
    }
    Ok(())
}

pub fn solve(cfg: &SolverConfig, f: &Nonlinearity) -> Result<Vec<Snapshot>, SolverError> {
    let mut out = Vec::new();
    solve_with(cfg, f, |s| out.push(s))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{mf_extend, AnalysisSettings};

    fn cubic() -> Nonlinearity {
        let base = Nonlinearity::preset("cubic_bistable", (-2.0, 2.0)).unwrap();
        mf_extend(&base, 2.0, 0.5, &AnalysisSettings::default()).unwrap().f
    }

    #[test]
    fn boundary_ode_examples() {
        let lin = Nonlinearity::polynomial(vec![0.0, -1.0], (-2.0, 2.0)).unwrap();
        let got = boundary_theta(&lin, 0.1, 1.0, 0.005).unwrap();
        assert!((got - 0.1 * (-1.0f64).exp()).abs() < 1e-8);
        let logistic = Nonlinearity::polynomial(vec![1.0, 0.0, -1.0], (-3.0, 3.0)).unwrap();
        let got = boundary_theta(&logistic, 0.0, 2.0, 0.005).unwrap();
        assert!((got - 2f64.tanh()).abs() < 1e-8);
        assert_eq!(boundary_theta(&cubic(), 0.0, 5.0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn boundary_ode_blowup_is_reported() {
        let f = Nonlinearity::polynomial(vec![1.0, 0.0, 1.0], (-3.0, 3.0)).unwrap();
        assert!(matches!(
            boundary_theta(&f, 0.0, 5.0, 0.01),
            Err(SolverError::Blowup { .. })
        ));
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let f = cubic();
        let grid = Grid::new(10.0, 0.05).unwrap();
        for gamma in [-1.0, 0.0, 1.0] {
            let s = Snapshot::new(0.0, grid, vec![gamma; grid.n]);
            let next = step(&s, &f, 0.01, BoundaryMode::OdeDriven).unwrap();
            let change = next.u.iter().map(|v| (v - gamma).abs()).fold(0.0, f64::max);
            assert!(change <= 1e-13, "gamma {gamma}: {change}");
            if gamma == 0.0 {
                assert!(next.u.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn zero_horizon_returns_initial_samples() {
        let f = cubic();
        let init = InitialData::CompactBump {
            center: 0.0,
            width: 4.0,
            amplitude: 0.5,
            sign_pattern: vec![1.0],
        };
        let mut cfg = SolverConfig::new(0.0, init.clone());
        cfg.half_width = 20.0;
        cfg.dx = 0.05;
        let snaps = solve(&cfg, &f).unwrap();
        assert_eq!(snaps.len(), 1);
        let grid = cfg.grid().unwrap();
        for (i, &v) in snaps[0].u.iter().enumerate() {
            assert_eq!(v, init.evaluate(grid.x(i)));
        }
    }

    #[test]
    fn grid_must_divide() {
        assert!(Grid::new(10.0, 0.3).is_err());
        assert_eq!(Grid::new(10.0, 0.01).unwrap().n, 2001);
    }

    #[test]
    fn support_must_clear_the_boundary() {
        let f = cubic();
        let init = InitialData::CompactBump {
            center: 0.0,
            width: 32.0,
            amplitude: 0.5,
            sign_pattern: vec![1.0],
        };
        let mut cfg = SolverConfig::new(1.0, init);
        cfg.half_width = 20.0;
        assert!(matches!(cfg.validate(&f), Err(SolverError::InvalidConfig(_))));
    }

    #[test]
    fn reflection_fixture_is_continuous() {
        let (m, k) = (3.0, 1.0);
        for x in [-k, k] {
            let l = reflection_fixture(m, k, x - 1e-12);
            let r = reflection_fixture(m, k, x + 1e-12);
            assert!((l - r).abs() < 1e-10);
        }
    }

    #[test]
    fn snapshot_steps_include_ends() {
        let mut cfg = SolverConfig::new(1.0, InitialData::TanhProfile { shift: 0.0, scale: 1.0 });
        cfg.dt = 0.01;
        cfg.snapshot_every = Some(0.25);
        let steps: Vec<usize> = cfg.snapshot_steps().into_iter().collect();
        assert_eq!(steps, vec![0, 25, 50, 75, 100]);
    }
}
