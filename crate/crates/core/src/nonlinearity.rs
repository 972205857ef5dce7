//! The reaction term `f`, its potential `F(u) = ∫₀ᵘ f`, the equilibrium census
//! with nondegeneracy checks, the linear-growth extension far from the origin,
//! and the (S)/(U) scenario classifier.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::gl5_split;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("degenerate zero of f at u = {at}: |f'| = {fprime:e} does not exceed nd_tol = {nd_tol:e}")]
    NdViolation { at: f64, fprime: f64, nd_tol: f64 },
    #[error("f touches zero near u = {at} without changing sign")]
    TangencySuspected { at: f64 },
    #[error("limit ODE trajectory left the window at t = {t} (theta = {theta})")]
    NoStableLimit { t: f64, theta: f64 },
    #[error("invalid nonlinearity: {0}")]
    Invalid(String),
}

/// Knobs of the stationary analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Sampling points per window for the sign scan.
    pub scan_points: usize,
    /// Bisection target for located zeros.
    pub zero_tol: f64,
    /// Zeros with |f'| at or below this are refused.
    pub nd_tol: f64,
    /// Tabulation nodes for the potential.
    pub potential_nodes: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            scan_points: 10_000,
            zero_tol: 1e-12,
            nd_tol: 1e-6,
            potential_nodes: 100_000,
        }
    }
}

#[derive(Clone)]
enum Reaction {
    /// Ascending-degree coefficients.
    Polynomial(Vec<f64>),
    Custom {
        value: ScalarFn,
        derivative: Option<ScalarFn>,
    },
    /// `base` on |s| <= kappa - blend_width, `s/2` on |s| >= kappa, linear in between.
    Extended {
        base: Box<Reaction>,
        kappa: f64,
        blend_width: f64,
        left_value: f64,
        right_value: f64,
    },
}

impl Reaction {
    fn value(&self, u: f64) -> f64 {
        match self {
            Reaction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * u + a),
            Reaction::Custom { value, .. } => value(u),
            Reaction::Extended {
                base,
                kappa,
                blend_width,
                left_value,
                right_value,
            } => {
                let inner = kappa - blend_width;
                let a = u.abs();
                if a >= *kappa {
                    0.5 * u
                } else if a <= inner {
                    base.value(u)
                } else if u > 0.0 {
                    let s = (u - inner) / blend_width;
                    right_value + s * (0.5 * kappa - right_value)
                } else {
                    let s = (-u - inner) / blend_width;
                    left_value + s * (-0.5 * kappa - left_value)
                }
            }
        }
    }

    fn derivative(&self, u: f64) -> Option<f64> {
        match self {
            Reaction::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, &a) in c.iter().enumerate().skip(1).rev() {
                    acc = acc * u + a * k as f64;
                }
                Some(acc)
            }
            Reaction::Custom { derivative, .. } => derivative.as_ref().map(|d| d(u)),
            Reaction::Extended {
                base,
                kappa,
                blend_width,
                left_value,
                right_value,
            } => {
                let inner = kappa - blend_width;
                let a = u.abs();
                if a >= *kappa {
                    Some(0.5)
                } else if a <= inner {
                    base.derivative(u)
                } else if u > 0.0 {
                    Some((0.5 * kappa - right_value) / blend_width)
                } else {
                    Some((0.5 * kappa + left_value) / blend_width)
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Reaction::Polynomial(_) | Reaction::Custom { .. } => Vec::new(),
            Reaction::Extended {
                base,
                kappa,
                blend_width,
                ..
            } => {
                let inner = kappa - blend_width;
                let mut out: Vec<f64> = base
                    .breakpoints()
                    .into_iter()
                    .filter(|b| b.abs() < inner)
                    .collect();
                out.extend([-kappa, -inner, inner, *kappa]);
                out.sort_by(f64::total_cmp);
                out
            }
        }
    }
}

/// The reaction term together with its analysis window.
#[derive(Clone)]
pub struct Nonlinearity {
    label: String,
    reaction: Reaction,
    window: (f64, f64),
    lipschitz_bound: f64,
    mf_kappa: Option<f64>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("window", &self.window)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("mf_kappa", &self.mf_kappa)
            .finish()
    }
}

pub const PRESETS: [&str; 3] = ["cubic_bistable", "quadratic_groundstate", "shifted_cubic"];

/// Coefficients (ascending degree) of the named presets.
///
/// * `cubic_bistable`: u − u³
/// * `quadratic_groundstate`: u² − u
/// * `shifted_cubic`: w − w³ with w = u − 1/2, zeros at −1/2, 1/2, 3/2
pub fn preset_coefficients(name: &str) -> Option<Vec<f64>> {
    match name {
        "cubic_bistable" => Some(vec![0.0, 1.0, 0.0, -1.0]),
        "quadratic_groundstate" => Some(vec![0.0, -1.0, 1.0]),
        "shifted_cubic" => Some(vec![-0.375, 0.25, 1.5, -1.0]),
        _ => None,
    }
}

impl Nonlinearity {
    pub fn polynomial(coefficients: Vec<f64>, window: (f64, f64)) -> Result<Self, NonlinearityError> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(NonlinearityError::Invalid(
                "polynomial coefficients must be a nonempty list of finite numbers".into(),
            ));
        }
        let label = format!("polynomial{:?}", coefficients);
        Self::build(label, Reaction::Polynomial(coefficients), window, None)
    }

    pub fn preset(name: &str, window: (f64, f64)) -> Result<Self, NonlinearityError> {
        let coefficients = preset_coefficients(name)
            .ok_or_else(|| NonlinearityError::Invalid(format!("unknown preset '{name}'")))?;
        let mut f = Self::polynomial(coefficients, window)?;
        f.label = name.to_string();
        Ok(f)
    }

    /// Wraps an arbitrary evaluator; f' falls back to central differences.
    pub fn from_fn<F>(label: &str, value: F, window: (f64, f64)) -> Result<Self, NonlinearityError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let reaction = Reaction::Custom {
            value: Arc::new(value),
            derivative: None,
        };
        Self::build(label.to_string(), reaction, window, None)
    }

    pub fn from_fn_with_derivative<F, D>(
        label: &str,
        value: F,
        derivative: D,
        window: (f64, f64),
    ) -> Result<Self, NonlinearityError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let reaction = Reaction::Custom {
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        };
        Self::build(label.to_string(), reaction, window, None)
    }

    fn build(
        label: String,
        reaction: Reaction,
        window: (f64, f64),
        mf_kappa: Option<f64>,
    ) -> Result<Self, NonlinearityError> {
        let (lo, hi) = window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(NonlinearityError::Invalid(format!(
                "window [{lo}, {hi}] must be a nonempty finite interval"
            )));
        }
        let mut f = Self {
            label,
            reaction,
            window,
            lipschitz_bound: 0.0,
            mf_kappa,
        };
        f.lipschitz_bound = f.estimate_lipschitz()?;
        Ok(f)
    }

    fn estimate_lipschitz(&self) -> Result<f64, NonlinearityError> {
        let (lo, hi) = self.window;
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mut bound: f64 = 0.0;
        let mut prev = self.value(lo);
        for i in 1..=n {
            let x = lo + i as f64 * h;
            let v = self.value(x);
            if !v.is_finite() {
                return Err(NonlinearityError::Invalid(format!("f is not finite at u = {x}")));
            }
            bound = bound.max(((v - prev) / h).abs());
            bound = bound.max(self.derivative(x).abs());
            prev = v;
        }
        Ok(1.01 * bound + 1e-12)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, u: f64) -> f64 {
        self.reaction.value(u)
    }

    /// f'(u): analytic where available, central difference otherwise.
    pub fn derivative(&self, u: f64) -> f64 {
        self.reaction
            .derivative(u)
            .unwrap_or_else(|| self.fd_derivative(u, 1e-6 * u.abs().max(1.0)))
    }

    pub fn fd_derivative(&self, u: f64, step: f64) -> f64 {
        (self.value(u + step) - self.value(u - step)) / (2.0 * step)
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn mf_kappa(&self) -> Option<f64> {
        self.mf_kappa
    }

    /// Kinks of a piecewise definition; quadrature splits there.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.reaction.breakpoints()
    }

    pub fn with_window(&self, window: (f64, f64)) -> Result<Self, NonlinearityError> {
        Self::build(self.label.clone(), self.reaction.clone(), window, self.mf_kappa)
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.window.0 && u <= self.window.1
    }

    fn blend_inner_radius(&self) -> Option<f64> {
        match &self.reaction {
            Reaction::Extended {
                kappa, blend_width, ..
            } => Some(kappa - blend_width),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeStability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    MfSatellite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub value: f64,
    pub fprime: f64,
    pub ode_stability: OdeStability,
    pub provenance: Provenance,
}

impl Equilibrium {
    /// A saddle of the stationary phase plane (F has a local maximum).
    pub fn is_saddle(&self) -> bool {
        self.fprime < 0.0
    }

    pub fn is_center(&self) -> bool {
        self.fprime > 0.0
    }
}

fn classify_zero(
    f: &Nonlinearity,
    at: f64,
    settings: &AnalysisSettings,
) -> Result<Equilibrium, NonlinearityError> {
    let fprime = f.derivative(at);
    if fprime.abs() <= settings.nd_tol {
        return Err(NonlinearityError::NdViolation {
            at,
            fprime,
            nd_tol: settings.nd_tol,
        });
    }
    let provenance = match f.blend_inner_radius() {
        Some(inner) if at.abs() > inner => Provenance::MfSatellite,
        _ => Provenance::Original,
    };
    Ok(Equilibrium {
        value: at,
        fprime,
        ode_stability: if fprime < 0.0 {
            OdeStability::Stable
        } else {
            OdeStability::Unstable
        },
        provenance,
    })
}

fn bisect_zero(f: &Nonlinearity, mut a: f64, mut b: f64) -> f64 {
    // Bisection never lands on 0 itself; it would creep towards it through subnormals.
    if a < 0.0 && b > 0.0 && f.value(0.0) == 0.0 {
        return 0.0;
    }
    let mut fa = f.value(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f.value(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    if f.value(a).abs() <= f.value(b).abs() {
        a
    } else {
        b
    }
}

fn golden_min_abs(f: &Nonlinearity, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    for _ in 0..120 {
        if f.value(c).abs() < f.value(d).abs() {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f.value(x).abs())
}

/// All zeros of `f` on its window, ascending, each classified by the sign of f'.
pub fn find_zeros(
    f: &Nonlinearity,
    settings: &AnalysisSettings,
) -> Result<Vec<Equilibrium>, NonlinearityError> {
    let (lo, hi) = f.window();
    let n = settings.scan_points.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    let tangency_tol = 1e3 * settings.zero_tol;

    let mut roots = Vec::new();
    for i in 0..n {
        if vals[i] == 0.0 {
            let left = if i > 0 { Some(vals[i - 1]) } else { None };
            let right = if i + 1 < n { Some(vals[i + 1]) } else { None };
            if let (Some(l), Some(r)) = (left, right) {
                if l != 0.0 && r != 0.0 && (l > 0.0) == (r > 0.0) {
                    return Err(NonlinearityError::TangencySuspected { at: xs[i] });
                }
            }
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < n && vals[i + 1] != 0.0 && (vals[i] > 0.0) != (vals[i + 1] > 0.0) {
            roots.push(bisect_zero(f, xs[i], xs[i + 1]));
        }
        if i > 0 && i + 1 < n {
            let (l, m, r) = (vals[i - 1], vals[i], vals[i + 1]);
            let same_sign = l != 0.0 && r != 0.0 && (l > 0.0) == (m > 0.0) && (r > 0.0) == (m > 0.0);
            if same_sign && m.abs() <= l.abs() && m.abs() <= r.abs() {
                let (at, min_abs) = golden_min_abs(f, xs[i - 1], xs[i + 1]);
                if min_abs <= tangency_tol {
                    return Err(NonlinearityError::TangencySuspected { at });
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * settings.zero_tol.max(f64::EPSILON));
    roots
        .into_iter()
        .map(|r| classify_zero(f, r, settings))
        .collect()
}

/// Tabulated potential F(u) = ∫₀ᵘ f(s) ds.
///
/// Nodes carry cumulative five-point Gauss-Legendre sums; evaluation between
/// nodes adds the partial-cell integral, so F is as smooth as f itself.
#[derive(Clone)]
pub struct Potential {
    f: Nonlinearity,
    lo: f64,
    h: f64,
    table: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Potential")
            .field("lo", &self.lo)
            .field("h", &self.h)
            .field("nodes", &self.table.len())
            .finish()
    }
}

impl Potential {
    pub fn new(f: &Nonlinearity, nodes: usize) -> Self {
        let (lo, hi) = f.window();
        let n = nodes.max(2);
        let h = (hi - lo) / (n - 1) as f64;
        let breakpoints = f.breakpoints();
        let g = |s: f64| f.value(s);
        let node = |k: usize| lo + k as f64 * h;

        let k0 = (((0.0 - lo) / h).floor().max(0.0) as usize).min(n - 2);
        let mut table = vec![0.0; n];
        table[k0] = -gl5_split(&g, node(k0), 0.0, &breakpoints);
        for k in k0 + 1..n {
            table[k] = table[k - 1] + gl5_split(&g, node(k - 1), node(k), &breakpoints);
        }
        for k in (0..k0).rev() {
            table[k] = table[k + 1] - gl5_split(&g, node(k), node(k + 1), &breakpoints);
        }
        Self {
            f: f.clone(),
            lo,
            h,
            table,
            breakpoints,
        }
    }

    fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.h
    }

    fn partial(&self, a: f64, b: f64) -> f64 {
        let g = |s: f64| self.f.value(s);
        let pieces = ((b - a).abs() / self.h).ceil().max(1.0) as usize;
        if pieces == 1 {
            return gl5_split(&g, a, b, &self.breakpoints);
        }
        let step = (b - a) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let x0 = a + i as f64 * step;
                let x1 = if i + 1 == pieces { b } else { x0 + step };
                gl5_split(&g, x0, x1, &self.breakpoints)
            })
            .sum()
    }

    /// F(u). Exactly zero at u = 0.
    pub fn value(&self, u: f64) -> f64 {
        let n = self.table.len();
        let k = (((u - self.lo) / self.h).floor().max(0.0) as usize).min(n - 2);
        self.table[k] + self.partial(self.node(k), u)
    }

    /// ∫ₐᵇ f, evaluated directly for short spans to avoid cancellation.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if (b - a).abs() <= 2.0 * self.h {
            self.partial(a, b)
        } else {
            self.value(b) - self.value(a)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.table.iter().enumerate().map(|(k, &v)| (self.node(k), v))
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.f
    }
}

pub fn potential(f: &Nonlinearity, settings: &AnalysisSettings) -> Potential {
    Potential::new(f, settings.potential_nodes)
}

/// Result of extending `f` linearly far from the origin.
#[derive(Debug, Clone)]
pub struct MfExtension {
    pub f: Nonlinearity,
    /// Zeros created by the blend.
    pub satellites: Vec<Equilibrium>,
}

/// Replaces `f` by `s/2` for |s| >= kappa with a linear blend over the
/// `blend_width` just inside ±kappa. The window grows to at least ±(kappa + 1).
pub fn mf_extend(
    f: &Nonlinearity,
    kappa: f64,
    blend_width: f64,
    settings: &AnalysisSettings,
) -> Result<MfExtension, NonlinearityError> {
    if !(kappa > 0.0 && blend_width > 0.0 && blend_width < kappa) {
        return Err(NonlinearityError::Invalid(format!(
            "need 0 < blend_width < kappa, got kappa = {kappa}, blend_width = {blend_width}"
        )));
    }
    let inner = kappa - blend_width;
    let left_value = f.value(-inner);
    let right_value = f.value(inner);
    let reaction = Reaction::Extended {
        base: Box::new(f.reaction.clone()),
        kappa,
        blend_width,
        left_value,
        right_value,
    };
    let (lo, hi) = f.window();
    let window = (lo.min(-kappa - 1.0), hi.max(kappa + 1.0));
    let extended = Nonlinearity::build(f.label.clone(), reaction, window, Some(kappa))?;

    let mut satellites = Vec::new();
    // Right blend runs from right_value at `inner` to kappa/2 > 0 at `kappa`.
    if right_value == 0.0 || left_value == 0.0 {
        let at = if right_value == 0.0 { inner } else { -inner };
        return Err(NonlinearityError::NdViolation {
            at,
            fprime: 0.0,
            nd_tol: settings.nd_tol,
        });
    }
    if right_value < 0.0 {
        let at = inner + blend_width * (-right_value) / (0.5 * kappa - right_value);
        satellites.push(classify_zero(&extended, at, settings)?);
    }
    // Left blend runs from left_value at `-inner` to -kappa/2 < 0 at `-kappa`.
    if left_value > 0.0 {
        let at = -inner - blend_width * left_value / (left_value + 0.5 * kappa);
        satellites.insert(0, classify_zero(&extended, at, settings)?);
    }
    Ok(MfExtension {
        f: extended,
        satellites,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioTag {
    S,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioClass {
    pub tag: ScenarioTag,
    /// Limit of θ' = f(θ), θ(0) = 0 when it is a stable equilibrium.
    pub theta_star: Option<f64>,
    /// Nearest zeros below and above 0, both stable, in case (U).
    pub bistable: Option<(f64, f64)>,
}

/// One classical fourth-order Runge-Kutta step of θ' = f(θ).
pub fn rk4_step(f: &Nonlinearity, theta: f64, h: f64) -> f64 {
    let k1 = f.value(theta);
    let k2 = f.value(theta + 0.5 * h * k1);
    let k3 = f.value(theta + 0.5 * h * k2);
    let k4 = f.value(theta + h * k3);
    theta + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

pub fn classify_scenario(
    f: &Nonlinearity,
    zeros: &[Equilibrium],
) -> Result<ScenarioClass, NonlinearityError> {
    let at_zero = zeros.iter().find(|z| z.value.abs() <= 1e-9);
    if let Some(z0) = at_zero {
        if z0.fprime > 0.0 {
            let below = zeros.iter().rfind(|z| z.value < z0.value);
            let above = zeros.iter().find(|z| z.value > z0.value);
            let bistable = match (below, above) {
                (Some(a), Some(b)) if a.fprime < 0.0 && b.fprime < 0.0 => Some((a.value, b.value)),
                _ => None,
            };
            return Ok(ScenarioClass {
                tag: ScenarioTag::U,
                theta_star: None,
                bistable,
            });
        }
        return Ok(ScenarioClass {
            tag: ScenarioTag::S,
            theta_star: Some(0.0),
            bistable: None,
        });
    }

    let h = 0.01;
    let mut theta = 0.0;
    let mut t = 0.0;
    while t < 1e4 {
        let next = rk4_step(f, theta, h);
        t += h;
        if !next.is_finite() || !f.contains(next) {
            return Err(NonlinearityError::NoStableLimit { t, theta: next });
        }
        let settled = (next - theta).abs() <= 1e-15 * next.abs().max(1.0);
        theta = next;
        if settled {
            break;
        }
    }
    let snapped = zeros
        .iter()
        .filter(|z| (z.value - theta).abs() < 1e-6 && z.fprime < 0.0)
        .map(|z| z.value)
        .next();
    match snapped {
        Some(theta_star) => Ok(ScenarioClass {
            tag: ScenarioTag::S,
            theta_star: Some(theta_star),
            bistable: None,
        }),
        None => Err(NonlinearityError::NoStableLimit { t, theta }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> Nonlinearity {
        Nonlinearity::preset("cubic_bistable", (-2.0, 2.0)).unwrap()
    }

    #[test]
    fn cubic_zero_census() {
        let z = find_zeros(&cubic(), &AnalysisSettings::default()).unwrap();
        let values: Vec<f64> = z.iter().map(|e| e.value).collect();
        assert_eq!(values.len(), 3);
        for (got, want) in values.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((z[0].fprime + 2.0).abs() < 1e-9);
        assert_eq!(z[0].ode_stability, OdeStability::Stable);
        assert!((z[1].fprime - 1.0).abs() < 1e-9);
        assert_eq!(z[1].ode_stability, OdeStability::Unstable);
        assert_eq!(z[2].ode_stability, OdeStability::Stable);
        assert!(z.iter().all(|e| e.provenance == Provenance::Original));
    }

    #[test]
    fn quadratic_zero_census() {
        let f = Nonlinearity::preset("quadratic_groundstate", (-1.0, 2.0)).unwrap();
        let z = find_zeros(&f, &AnalysisSettings::default()).unwrap();
        assert_eq!(z.len(), 2);
        assert!(z[0].value.abs() < 1e-12 && z[0].is_saddle());
        assert!((z[1].value - 1.0).abs() < 1e-12 && z[1].is_center());
        assert!((z[0].fprime + 1.0).abs() < 1e-9 && (z[1].fprime - 1.0).abs() < 1e-9);
    }

    #[test]
    fn triple_root_is_refused() {
        let f = Nonlinearity::polynomial(vec![0.0, 0.0, 0.0, 1.0], (-2.0, 2.0)).unwrap();
        let settings = AnalysisSettings {
            nd_tol: 1e-8,
            ..Default::default()
        };
        match find_zeros(&f, &settings) {
            Err(NonlinearityError::NdViolation { at, .. }) => assert!(at.abs() < 1e-9),
            other => panic!("expected NdViolation, got {other:?}"),
        }
    }

    #[test]
    fn touching_zero_is_suspected() {
        let f = Nonlinearity::polynomial(vec![0.0, 0.0, 1.0], (-1.0, 1.3)).unwrap();
        assert!(matches!(
            find_zeros(&f, &AnalysisSettings::default()),
            Err(NonlinearityError::TangencySuspected { .. })
        ));
    }

    #[test]
    fn potential_anchors_and_values() {
        let s = AnalysisSettings::default();
        let pot = potential(&cubic(), &s);
        assert_eq!(pot.value(0.0), 0.0);
        assert!((pot.value(1.0) - 0.25).abs() < 1e-13);
        assert!((pot.value(-1.0) - 0.25).abs() < 1e-13);
        let q = Nonlinearity::preset("quadratic_groundstate", (-1.0, 2.0)).unwrap();
        let pq = potential(&q, &s);
        assert_eq!(pq.value(0.0), 0.0);
        assert!(pq.value(1.5).abs() < 1e-13);
    }

    #[test]
    fn potential_derivative_matches_f() {
        let f = Nonlinearity::preset("shifted_cubic", (-2.0, 2.5)).unwrap();
        let pot = potential(&f, &AnalysisSettings::default());
        let h = 1e-4;
        for i in 0..50 {
            let u = -1.8 + 0.08 * i as f64;
            let d = (pot.value(u + h) - pot.value(u - h)) / (2.0 * h);
            assert!((d - f.value(u)).abs() < 1e-7, "u = {u}: {d} vs {}", f.value(u));
        }
    }

    #[test]
    fn cubic_extension_creates_two_centers() {
        let s = AnalysisSettings::default();
        let ext = mf_extend(&cubic(), 2.0, 0.5, &s).unwrap();
        assert_eq!(ext.satellites.len(), 2);
        // Blend from f(1.5) = -1.875 to 1 over [1.5, 2].
        let expected = 1.5 + 0.5 * 1.875 / 2.875;
        assert!((ext.satellites[1].value - expected).abs() < 1e-12);
        assert!((ext.satellites[0].value + expected).abs() < 1e-12);
        for sat in &ext.satellites {
            assert!(sat.fprime > 0.0);
            assert_eq!(sat.provenance, Provenance::MfSatellite);
            assert!(sat.value.abs() > 1.5 && sat.value.abs() < 2.0);
        }
        // The blended evaluator agrees with a bisection on itself.
        let g = &ext.f;
        let root = bisect_zero(g, 1.5, 2.0);
        assert!((root - expected).abs() < 1e-12);
        let z = find_zeros(g, &s).unwrap();
        assert_eq!(z.len(), 5);
        assert_eq!(z.iter().filter(|e| e.provenance == Provenance::MfSatellite).count(), 2);
    }

    #[test]
    fn quadratic_extension_has_one_satellite_on_the_left() {
        let s = AnalysisSettings::default();
        let f = Nonlinearity::preset("quadratic_groundstate", (-1.0, 2.0)).unwrap();
        let ext = mf_extend(&f, 2.0, 0.5, &s).unwrap();
        assert_eq!(ext.satellites.len(), 1);
        let sat = ext.satellites[0];
        assert!(sat.value < -1.5 && sat.value > -2.0 && sat.fprime > 0.0);
        // Sign scan on the positive blend: strictly positive.
        for i in 0..=100 {
            let u = 1.5 + 0.005 * i as f64;
            assert!(ext.f.value(u) > 0.0);
        }
    }

    #[test]
    fn extension_of_linear_growth_is_identity() {
        let s = AnalysisSettings::default();
        let f = Nonlinearity::polynomial(vec![0.0, 0.5], (-3.0, 3.0)).unwrap();
        let ext = mf_extend(&f, 2.0, 0.5, &s).unwrap();
        assert!(ext.satellites.is_empty());
        for i in 0..=600 {
            let u = -3.0 + 0.01 * i as f64;
            assert!((ext.f.value(u) - 0.5 * u).abs() < 1e-15);
        }
    }

    #[test]
    fn extension_keeps_f_inside_and_is_linear_outside() {
        let s = AnalysisSettings::default();
        let base = cubic();
        let ext = mf_extend(&base, 2.0, 0.5, &s).unwrap();
        for i in 0..=300 {
            let u = -1.5 + 0.01 * i as f64;
            assert_eq!(ext.f.value(u), base.value(u));
        }
        for &u in &[-2.9, -2.2, -2.0, 2.0, 2.5, 3.0] {
            assert_eq!(ext.f.value(u), 0.5 * u);
        }
        assert_eq!(ext.f.mf_kappa(), Some(2.0));
        assert_eq!(ext.f.window(), (-3.0, 3.0));
    }

    #[test]
    fn lipschitz_bound_holds_on_sampled_pairs() {
        let s = AnalysisSettings::default();
        let ext = mf_extend(&cubic(), 2.0, 0.5, &s).unwrap().f;
        let lip = ext.lipschitz_bound();
        for i in 0..200 {
            let a = -3.0 + 0.03 * i as f64;
            let b = a + 0.0137;
            assert!((ext.value(a) - ext.value(b)).abs() <= lip * (a - b).abs());
        }
    }

    #[test]
    fn scenario_classes() {
        let s = AnalysisSettings::default();
        let c = cubic();
        let cls = classify_scenario(&c, &find_zeros(&c, &s).unwrap()).unwrap();
        assert_eq!(cls.tag, ScenarioTag::U);
        let (g1, g2) = cls.bistable.unwrap();
        assert!((g1 + 1.0).abs() < 1e-12 && (g2 - 1.0).abs() < 1e-12);

        let q = Nonlinearity::preset("quadratic_groundstate", (-1.0, 2.0)).unwrap();
        let cls = classify_scenario(&q, &find_zeros(&q, &s).unwrap()).unwrap();
        assert_eq!(cls.tag, ScenarioTag::S);
        assert_eq!(cls.theta_star, Some(0.0));

        let r = Nonlinearity::polynomial(vec![1.0, 0.0, -1.0], (-2.0, 2.0)).unwrap();
        let cls = classify_scenario(&r, &find_zeros(&r, &s).unwrap()).unwrap();
        assert_eq!(cls.tag, ScenarioTag::S);
        assert!((cls.theta_star.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn escaping_limit_ode_is_reported() {
        let s = AnalysisSettings::default();
        // θ' = 1 + θ² has no equilibria and runs off the window.
        let f = Nonlinearity::polynomial(vec![1.0, 0.0, 1.0], (-2.0, 2.0)).unwrap();
        let zeros = find_zeros(&f, &s).unwrap();
        assert!(zeros.is_empty());
        assert!(matches!(
            classify_scenario(&f, &zeros),
            Err(NonlinearityError::NoStableLimit { .. })
        ));
    }

    #[test]
    fn fd_derivative_sign_is_stable_under_halving() {
        let s = AnalysisSettings::default();
        let f = Nonlinearity::from_fn("sin", |u: f64| (3.0 * u).sin(), (-2.0, 2.0)).unwrap();
        for z in find_zeros(&f, &s).unwrap() {
            assert!(f.value(z.value).abs() < s.zero_tol);
            let d1 = f.fd_derivative(z.value, 1e-4);
            let d2 = f.fd_derivative(z.value, 5e-5);
            assert_eq!(d1 > 0.0, d2 > 0.0);
            assert_eq!(d1 > 0.0, z.fprime > 0.0);
        }
    }
}
