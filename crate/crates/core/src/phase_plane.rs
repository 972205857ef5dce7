//! Stationary phase plane of `u'' + f(u) = 0`.
//!
//! Every object is read off the potential: a chain at energy `c` is the set
//! `{(u, ±√(2(c − F(u)))) : u ∈ [p, q]}` where `[p, q]` is the component of
//! `{F ≤ c}` through a saddle. Loops split a chain at its saddles, and the
//! annular components of the periodic set are indexed by their inner chain.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::{
    find_zeros, AnalysisSettings, Equilibrium, Nonlinearity, NonlinearityError, Potential,
};
use crate::quadrature::{adaptive_gl5, gl5_split};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error(
        "window too small: F({edge}) = {edge_energy} does not exceed the top saddle energy {saddle_energy}"
    )]
    WindowTooSmall {
        edge: f64,
        edge_energy: f64,
        saddle_energy: f64,
    },
    #[error("level set through p = {p} hits the saddle at u = {saddle}")]
    HitsSaddle { p: f64, saddle: f64 },
    #[error("no return point to the right of p = {p} inside the window")]
    NoReturn { p: f64 },
    #[error("p = {p} is not a left turning point (f(p) = {fp})")]
    NotLeftTurningPoint { p: f64, fp: f64 },
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}

/// Samples per monotone arc of a loop boundary.
pub const ARC_SAMPLES: usize = 1000;

/// Relative tolerance under which two saddle levels count as equal.
const LEVEL_TOL: f64 = 1e-10;

pub fn hamiltonian(potential: &Potential, u: f64, v: f64) -> f64 {
    0.5 * v * v + potential.value(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub p: f64,
    pub q: f64,
    pub energy: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Homoclinic,
    Heteroclinic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    pub id: usize,
    pub chain_id: usize,
    pub kind: LoopKind,
    pub left: f64,
    pub right: f64,
    pub energy: f64,
    /// One saddle for a homoclinic loop, two for a heteroclinic one.
    pub saddles: Vec<f64>,
}

impl Loop {
    pub fn anchors(&self) -> (f64, f64) {
        (self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub id: usize,
    pub trivial: bool,
    pub p: f64,
    pub q: f64,
    pub energy: f64,
    pub saddles: Vec<f64>,
    pub loops: Vec<Loop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiComponent {
    pub id: usize,
    pub inner_chain: usize,
    /// Global loop id; absent for the unbounded component.
    pub outer_loop: Option<usize>,
    pub p_hat: Option<f64>,
    pub q_hat: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainRelation {
    Same,
    /// Row chain lies in the interior of the column chain.
    Inside,
    /// Column chain lies in the interior of the row chain.
    Contains,
    Separated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOrder {
    pub relations: Vec<Vec<ChainRelation>>,
}

impl ChainOrder {
    pub fn inside(&self, i: usize, j: usize) -> bool {
        self.relations[i][j] == ChainRelation::Inside
    }

    /// Each off-diagonal pair satisfies exactly one of inside / contains / separated,
    /// and the table is antisymmetric.
    pub fn is_consistent(&self) -> bool {
        let n = self.relations.len();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let r = self.relations[i][j];
                let s = self.relations[j][i];
                match r {
                    ChainRelation::Same => i == j,
                    ChainRelation::Inside => s == ChainRelation::Contains,
                    ChainRelation::Contains => s == ChainRelation::Inside,
                    ChainRelation::Separated => s == ChainRelation::Separated,
                }
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    OnBoundary,
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Interior I(Σ) of a chain, boundary Σ.
    Chain(usize),
    /// Interior of a loop (global id), boundary the loop.
    LoopInterior(usize),
    /// A component Π of the periodic set, boundary Σ_in ∪ Λ_out.
    Component(usize),
}

/// Finds u in [a, b] with F(u) = level; F must be monotone on [a, b] with
/// F − level changing sign.
fn solve_level(potential: &Potential, level: f64, a: f64, b: f64) -> f64 {
    let g = |u: f64| potential.value(u) - level;
    let (mut lo, mut hi) = (a, b);
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// `c − F(u)` for a point of the loop `[a, b]` at level `c`, integrated from the
/// nearer anchor so that it stays accurate near the turning points.
fn level_gap(potential: &Potential, a: f64, b: f64, u: f64) -> f64 {
    let gap = if u - a <= b - u {
        -potential.integral(a, u)
    } else {
        potential.integral(u, b)
    };
    gap.max(0.0)
}

/// The periodic orbit whose left turning point is `p` (requires f(p) < 0).
pub fn periodic_orbit_through(
    potential: &Potential,
    zeros: &[Equilibrium],
    p: f64,
) -> Result<PeriodicOrbit, PhaseError> {
    let f = potential.nonlinearity();
    if let Some(z) = zeros.iter().find(|z| (z.value - p).abs() <= 1e-9) {
        if z.is_saddle() {
            return Err(PhaseError::HitsSaddle { p, saddle: z.value });
        }
        return Err(PhaseError::NotLeftTurningPoint { p, fp: f.value(p) });
    }
    let fp = f.value(p);
    if fp >= 0.0 {
        return Err(PhaseError::NotLeftTurningPoint { p, fp });
    }
    let c = potential.value(p);
    let mut last_min = p;
    let mut q = None;
    for z in zeros.iter().filter(|z| z.value > p) {
        if z.is_center() {
            last_min = z.value;
            continue;
        }
        let fz = potential.value(z.value);
        if same_level(fz, c) {
            return Err(PhaseError::HitsSaddle { p, saddle: z.value });
        }
        if fz > c {
            q = Some(solve_level(potential, c, last_min, z.value));
            break;
        }
    }
    let q = match q {
        Some(q) => q,
        None => {
            let hi = f.window().1;
            if potential.value(hi) <= c {
                return Err(PhaseError::NoReturn { p });
            }
            solve_level(potential, c, last_min, hi)
        }
    };
    let period = orbit_period(potential, p, q);
    Ok(PeriodicOrbit {
        p,
        q,
        energy: c,
        period,
    })
}

/// `F(anchor) − F(anchor + d)`, taking the offset `d` as exact: near a turning
/// point `anchor + d` would round away most of the digits of a small `d`.
fn gap_from(potential: &Potential, anchor: f64, d: f64) -> f64 {
    let f = potential.nonlinearity();
    let gap = if d.abs() <= 2.0 * potential.spacing() {
        let g = |t: f64| f.value(anchor + d * t);
        let kinks: Vec<f64> = f
            .breakpoints()
            .iter()
            .map(|b| (b - anchor) / d)
            .filter(|t| *t > 0.0 && *t < 1.0)
            .collect();
        -d * gl5_split(&g, 0.0, 1.0, &kinks)
    } else {
        potential.value(anchor) - potential.value(anchor + d)
    };
    gap.max(0.0)
}

/// 2∫ du / √(2(c − F(u))) over [p, q], after u = p + (q − p)(1 − cos θ)/2
/// which removes the inverse-square-root endpoint singularities. Each half is
/// measured from its own turning point.
fn orbit_period(potential: &Potential, p: f64, q: f64) -> f64 {
    let width = q - p;
    let integrand = |theta: f64| {
        let (s, c) = (0.5 * theta).sin_cos();
        let gap = if theta <= std::f64::consts::FRAC_PI_2 {
            gap_from(potential, p, width * s * s)
        } else {
            gap_from(potential, q, -width * c * c)
        };
        if gap <= 0.0 {
            return 0.0;
        }
        0.5 * width * theta.sin() / (2.0 * gap).sqrt()
    };
    2.0 * adaptive_gl5(&integrand, 0.0, std::f64::consts::PI, 1e-13)
}

/// Chains of the phase plane: one trivial chain per center, one nontrivial
/// chain per saddle level component. Sorted by energy (then position).
pub fn enumerate_chains(
    potential: &Potential,
    zeros: &[Equilibrium],
) -> Result<Vec<Chain>, PhaseError> {
    let f = potential.nonlinearity();
    let (lo, hi) = f.window();
    let saddle_top = zeros
        .iter()
        .filter(|z| z.is_saddle())
        .map(|z| potential.value(z.value))
        .fold(f64::NEG_INFINITY, f64::max);
    if saddle_top.is_finite() {
        for edge in [lo, hi] {
            let edge_energy = potential.value(edge);
            if edge_energy <= saddle_top {
                return Err(PhaseError::WindowTooSmall {
                    edge,
                    edge_energy,
                    saddle_energy: saddle_top,
                });
            }
        }
    }

    let mut chains: Vec<Chain> = zeros
        .iter()
        .filter(|z| z.is_center())
        .map(|z| Chain {
            id: 0,
            trivial: true,
            p: z.value,
            q: z.value,
            energy: potential.value(z.value),
            saddles: Vec::new(),
            loops: Vec::new(),
        })
        .collect();

    let mut claimed = vec![false; zeros.len()];
    for (i, z) in zeros.iter().enumerate() {
        if !z.is_saddle() || claimed[i] {
            continue;
        }
        let c = potential.value(z.value);
        let mut members = vec![i];

        let mut last_min = z.value;
        let mut p = None;
        for j in (0..i).rev() {
            let w = &zeros[j];
            if w.is_center() {
                last_min = w.value;
                continue;
            }
            let fw = potential.value(w.value);
            if same_level(fw, c) {
                members.push(j);
            } else if fw > c {
                p = Some(solve_level(potential, c, w.value, last_min));
                break;
            }
        }
        let p = p.unwrap_or_else(|| solve_level(potential, c, lo, last_min));

        let mut last_min = z.value;
        let mut q = None;
        for (j, w) in zeros.iter().enumerate().skip(i + 1) {
            if w.is_center() {
                last_min = w.value;
                continue;
            }
            let fw = potential.value(w.value);
            if same_level(fw, c) {
                members.push(j);
            } else if fw > c {
                q = Some(solve_level(potential, c, last_min, w.value));
                break;
            }
        }
        let q = q.unwrap_or_else(|| solve_level(potential, c, last_min, hi));

        for &m in &members {
            claimed[m] = true;
        }
        let mut saddles: Vec<f64> = members.iter().map(|&m| zeros[m].value).collect();
        saddles.sort_by(f64::total_cmp);
        chains.push(Chain {
            id: 0,
            trivial: false,
            p,
            q,
            energy: c,
            saddles,
            loops: Vec::new(),
        });
    }

    chains.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.p.total_cmp(&b.p)));
    let mut next_loop = 0;
    for (id, chain) in chains.iter_mut().enumerate() {
        chain.id = id;
        if chain.trivial {
            continue;
        }
        let mut anchors = vec![chain.p];
        anchors.extend(chain.saddles.iter().copied());
        anchors.push(chain.q);
        let last = anchors.len() - 2;
        for k in 0..=last {
            let (left, right) = (anchors[k], anchors[k + 1]);
            let (kind, saddles) = if k == 0 {
                (LoopKind::Homoclinic, vec![right])
            } else if k == last {
                (LoopKind::Homoclinic, vec![left])
            } else {
                (LoopKind::Heteroclinic, vec![left, right])
            };
            chain.loops.push(Loop {
                id: next_loop,
                chain_id: id,
                kind,
                left,
                right,
                energy: chain.energy,
                saddles,
            });
            next_loop += 1;
        }
    }
    Ok(chains)
}

fn loop_encloses_chain(lp: &Loop, chain: &Chain) -> bool {
    lp.chain_id != chain.id && lp.left < chain.p && chain.q < lp.right && chain.energy < lp.energy
}

/// One component per chain: the chain is its inner boundary and the smallest
/// loop enclosing the chain is its outer boundary.
pub fn pi_components(chains: &[Chain]) -> Vec<PiComponent> {
    chains
        .iter()
        .map(|chain| {
            let outer = chains
                .iter()
                .flat_map(|c| c.loops.iter())
                .filter(|lp| loop_encloses_chain(lp, chain))
                .min_by(|a, b| {
                    a.energy
                        .total_cmp(&b.energy)
                        .then((a.right - a.left).total_cmp(&(b.right - b.left)))
                });
            PiComponent {
                id: chain.id,
                inner_chain: chain.id,
                outer_loop: outer.map(|lp| lp.id),
                p_hat: outer.map(|lp| lp.left),
                q_hat: outer.map(|lp| lp.right),
            }
        })
        .collect()
}

/// Extreme zeros of f on the chain's u-interval.
pub fn beta_pm(chain: &Chain, zeros: &[Equilibrium]) -> (f64, f64) {
    if chain.trivial {
        return (chain.p, chain.p);
    }
    let inside: Vec<f64> = zeros
        .iter()
        .map(|z| z.value)
        .filter(|&v| v >= chain.p && v <= chain.q)
        .collect();
    let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn order_chains(chains: &[Chain]) -> ChainOrder {
    let inside = |a: &Chain, b: &Chain| b.p < a.p && a.q < b.q && a.energy < b.energy;
    let relations = chains
        .iter()
        .map(|a| {
            chains
                .iter()
                .map(|b| {
                    if a.id == b.id {
                        ChainRelation::Same
                    } else if inside(a, b) {
                        ChainRelation::Inside
                    } else if inside(b, a) {
                        ChainRelation::Contains
                    } else {
                        ChainRelation::Separated
                    }
                })
                .collect()
        })
        .collect();
    ChainOrder { relations }
}

#[derive(Debug, Clone, Copy)]
struct ArcSample {
    u: f64,
    v: f64,
    /// Index into `ChainCurve::loops`.
    lp: usize,
    upper: bool,
    k: usize,
}

/// Sampled boundary of a chain or loop, used for point distances.
#[derive(Debug, Clone)]
pub struct ChainCurve {
    point: Option<(f64, f64)>,
    loops: Vec<(f64, f64)>,
    samples: Vec<ArcSample>,
    n: usize,
}

impl ChainCurve {
    fn for_loops(potential: &Potential, loops: &[(f64, f64)], n: usize) -> Self {
        let mut samples = Vec::with_capacity(loops.len() * 2 * (n + 1));
        for (idx, &(a, b)) in loops.iter().enumerate() {
            for k in 0..=n {
                let (u, v) = loop_point(potential, a, b, k as f64 * std::f64::consts::PI / n as f64);
                samples.push(ArcSample {
                    u,
                    v,
                    lp: idx,
                    upper: true,
                    k,
                });
                samples.push(ArcSample {
                    u,
                    v: -v,
                    lp: idx,
                    upper: false,
                    k,
                });
            }
        }
        samples.sort_by(|x, y| x.u.total_cmp(&y.u));
        Self {
            point: None,
            loops: loops.to_vec(),
            samples,
            n,
        }
    }

    fn for_point(u: f64) -> Self {
        Self {
            point: Some((u, 0.0)),
            loops: Vec::new(),
            samples: Vec::new(),
            n: 0,
        }
    }

    /// Boundary points (upper and lower arcs of every loop).
    pub fn points(&self) -> Vec<(f64, f64)> {
        match self.point {
            Some(p) => vec![p],
            None => self.samples.iter().map(|s| (s.u, s.v)).collect(),
        }
    }

    fn coarse(&self, u0: f64, v0: f64) -> (f64, usize) {
        let idx = self.samples.partition_point(|s| s.u < u0);
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        let mut i = idx;
        while i < self.samples.len() {
            let s = self.samples[i];
            if s.u - u0 >= best {
                break;
            }
            let d = (s.u - u0).hypot(s.v - v0);
            if d < best {
                best = d;
                best_i = i;
            }
            i += 1;
        }
        let mut i = idx;
        while i > 0 {
            i -= 1;
            let s = self.samples[i];
            if u0 - s.u >= best {
                break;
            }
            let d = (s.u - u0).hypot(s.v - v0);
            if d < best {
                best = d;
                best_i = i;
            }
        }
        (best, best_i)
    }

    fn refine(&self, potential: &Potential, u0: f64, v0: f64, sample: usize, coarse: f64) -> f64 {
        let s = self.samples[sample];
        let (a, b) = self.loops[s.lp];
        let step = std::f64::consts::PI / self.n as f64;
        let t_lo = (s.k as f64 - 1.0).max(0.0) * step;
        let t_hi = ((s.k as f64 + 1.0) * step).min(std::f64::consts::PI);
        let sign = if s.upper { 1.0 } else { -1.0 };
        let dist = |t: f64| {
            let (u, v) = loop_point(potential, a, b, t);
            (u - u0).hypot(sign * v - v0)
        };
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (t_lo, t_hi);
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let (mut fc, mut fd) = (dist(c), dist(d));
        for _ in 0..40 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = dist(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = dist(d);
            }
        }
        coarse.min(fc).min(fd).min(dist(t_lo)).min(dist(t_hi))
    }

    /// Euclidean distance from a point to the curve.
    pub fn distance(&self, potential: &Potential, u0: f64, v0: f64) -> f64 {
        if let Some((pu, pv)) = self.point {
            return (u0 - pu).hypot(v0 - pv);
        }
        let (coarse, i) = self.coarse(u0, v0);
        self.refine(potential, u0, v0, i, coarse)
    }

    /// sup over points of the distance to the curve.
    pub fn sup_distance(&self, potential: &Potential, points: &[(f64, f64)]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        if let Some((pu, pv)) = self.point {
            return points
                .iter()
                .map(|&(u, v)| (u - pu).hypot(v - pv))
                .fold(0.0, f64::max);
        }
        // Coarse distances bound the refined ones from above, so only the
        // largest coarse candidates need refinement.
        let mut coarse: Vec<(f64, usize, usize)> = points
            .iter()
            .enumerate()
            .map(|(pi, &(u, v))| {
                let (d, si) = self.coarse(u, v);
                (d, si, pi)
            })
            .collect();
        coarse.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best: f64 = 0.0;
        for &(d, si, pi) in &coarse {
            if d <= best {
                break;
            }
            let (u, v) = points[pi];
            best = best.max(self.refine(potential, u, v, si, d));
        }
        best
    }
}

fn loop_point(potential: &Potential, a: f64, b: f64, theta: f64) -> (f64, f64) {
    let u = a + 0.5 * (b - a) * (1.0 - theta.cos());
    let u = u.clamp(a, b);
    let v = (2.0 * level_gap(potential, a, b, u)).sqrt();
    (u, v)
}

/// The full stationary census for one nonlinearity.
#[derive(Debug, Clone)]
pub struct Census {
    pub f: Nonlinearity,
    pub potential: Arc<Potential>,
    pub equilibria: Vec<Equilibrium>,
    pub chains: Vec<Chain>,
    pub components: Vec<PiComponent>,
    pub order: ChainOrder,
    chain_curves: Vec<ChainCurve>,
    loop_curves: Vec<ChainCurve>,
}

impl Census {
    pub fn build(f: &Nonlinearity, settings: &AnalysisSettings) -> Result<Self, PhaseError> {
        let equilibria = find_zeros(f, settings)?;
        let potential = Arc::new(Potential::new(f, settings.potential_nodes));
        let chains = enumerate_chains(&potential, &equilibria)?;
        let components = pi_components(&chains);
        let order = order_chains(&chains);
        let chain_curves = chains
            .iter()
            .map(|c| {
                if c.trivial {
                    ChainCurve::for_point(c.p)
                } else {
                    let loops: Vec<(f64, f64)> = c.loops.iter().map(|l| (l.left, l.right)).collect();
                    ChainCurve::for_loops(&potential, &loops, ARC_SAMPLES)
                }
            })
            .collect();
        let loop_curves = chains
            .iter()
            .flat_map(|c| c.loops.iter())
            .map(|l| ChainCurve::for_loops(&potential, &[(l.left, l.right)], ARC_SAMPLES))
            .collect();
        Ok(Self {
            f: f.clone(),
            potential,
            equilibria,
            chains,
            components,
            order,
            chain_curves,
            loop_curves,
        })
    }

    pub fn loops(&self) -> impl Iterator<Item = &Loop> {
        self.chains.iter().flat_map(|c| c.loops.iter())
    }

    pub fn loop_by_id(&self, id: usize) -> Option<&Loop> {
        self.loops().find(|l| l.id == id)
    }

    pub fn chain_curve(&self, chain: usize) -> &ChainCurve {
        &self.chain_curves[chain]
    }

    pub fn loop_curve(&self, loop_id: usize) -> &ChainCurve {
        &self.loop_curves[loop_id]
    }

    pub fn hamiltonian(&self, u: f64, v: f64) -> f64 {
        hamiltonian(&self.potential, u, v)
    }

    pub fn periodic_orbit_through(&self, p: f64) -> Result<PeriodicOrbit, PhaseError> {
        periodic_orbit_through(&self.potential, &self.equilibria, p)
    }

    pub fn beta_pm(&self, chain: usize) -> (f64, f64) {
        beta_pm(&self.chains[chain], &self.equilibria)
    }

    pub fn distance_to_chain(&self, chain: usize, u: f64, v: f64) -> f64 {
        self.chain_curves[chain].distance(&self.potential, u, v)
    }

    /// Strict interior of a loop.
    pub fn in_loop_interior(&self, loop_id: usize, u: f64, v: f64) -> bool {
        match self.loop_by_id(loop_id) {
            Some(l) => u > l.left && u < l.right && self.hamiltonian(u, v) < l.energy,
            None => false,
        }
    }

    /// Strict interior I(Σ): the union of the loop interiors. Empty for a trivial chain.
    pub fn in_chain_interior(&self, chain: usize, u: f64, v: f64) -> bool {
        self.chains[chain]
            .loops
            .iter()
            .any(|l| self.in_loop_interior(l.id, u, v))
    }

    /// Ī(Σ) = I(Σ) ∪ Σ, with Σ thickened by `band`.
    pub fn in_chain_closure(&self, chain: usize, u: f64, v: f64, band: f64) -> bool {
        self.in_chain_interior(chain, u, v) || self.distance_to_chain(chain, u, v) <= band
    }

    /// Distance from a point to Ī(Σ).
    pub fn distance_to_chain_closure(&self, chain: usize, u: f64, v: f64) -> f64 {
        if self.in_chain_interior(chain, u, v) {
            0.0
        } else {
            self.distance_to_chain(chain, u, v)
        }
    }

    pub fn membership(&self, u: f64, v: f64, region: Region, band: f64) -> Membership {
        match region {
            Region::Chain(id) => {
                if self.distance_to_chain(id, u, v) <= band {
                    Membership::OnBoundary
                } else if self.in_chain_interior(id, u, v) {
                    Membership::Inside
                } else {
                    Membership::Outside
                }
            }
            Region::LoopInterior(id) => {
                if self.loop_curves[id].distance(&self.potential, u, v) <= band {
                    Membership::OnBoundary
                } else if self.in_loop_interior(id, u, v) {
                    Membership::Inside
                } else {
                    Membership::Outside
                }
            }
            Region::Component(id) => {
                let comp = &self.components[id];
                let near_inner = self.distance_to_chain(comp.inner_chain, u, v) <= band;
                let near_outer = comp
                    .outer_loop
                    .map(|l| self.loop_curves[l].distance(&self.potential, u, v) <= band)
                    .unwrap_or(false);
                if near_inner || near_outer {
                    return Membership::OnBoundary;
                }
                let within_outer = comp
                    .outer_loop
                    .map(|l| self.in_loop_interior(l, u, v))
                    .unwrap_or(true);
                if within_outer && !self.in_chain_interior(comp.inner_chain, u, v) {
                    Membership::Inside
                } else {
                    Membership::Outside
                }
            }
        }
    }

    /// `count` periodic orbits of a component, with energies spread strictly
    /// between the inner chain and the outer loop (or the window edge).
    pub fn sample_orbits(&self, component: usize, count: usize) -> Result<Vec<PeriodicOrbit>, PhaseError> {
        let comp = &self.components[component];
        let inner = &self.chains[comp.inner_chain];
        let (lo, hi) = self.f.window();
        let (left_bound, top) = match comp.outer_loop.and_then(|l| self.loop_by_id(l)) {
            Some(l) => (l.left, l.energy),
            None => (lo, self.potential.value(lo).min(self.potential.value(hi))),
        };
        let bottom = inner.energy;
        (1..=count)
            .map(|k| {
                let level = bottom + (top - bottom) * k as f64 / (count + 1) as f64;
                let p = solve_level(&self.potential, level, left_bound, inner.p);
                self.periodic_orbit_through(p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::mf_extend;

    fn cubic_census() -> Census {
        let s = AnalysisSettings::default();
        let base = Nonlinearity::preset("cubic_bistable", (-2.0, 2.0)).unwrap();
        let f = mf_extend(&base, 2.0, 0.5, &s).unwrap().f;
        Census::build(&f, &s).unwrap()
    }

    #[test]
    fn hamiltonian_anchors() {
        let c = cubic_census();
        assert!((c.hamiltonian(1.0, 0.0) - 0.25).abs() < 1e-13);
        assert_eq!(c.hamiltonian(0.0, 0.0), 0.0);
    }

    #[test]
    fn symmetric_orbit_returns_at_mirror_point() {
        let c = cubic_census();
        let orbit = c.periodic_orbit_through(-0.5).unwrap();
        assert!((orbit.q - 0.5).abs() < 1e-12);
        assert!(orbit.period > 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn saddle_level_is_refused() {
        let c = cubic_census();
        assert!(matches!(
            c.periodic_orbit_through(-1.0),
            Err(PhaseError::HitsSaddle { .. })
        ));
        assert!(matches!(
            c.periodic_orbit_through(0.5),
            Err(PhaseError::NotLeftTurningPoint { .. })
        ));
    }

    #[test]
    fn window_must_clear_the_saddles() {
        let s = AnalysisSettings::default();
        let base = Nonlinearity::preset("quadratic_groundstate", (-1.0, 2.0)).unwrap();
        let f = mf_extend(&base, 2.0, 0.5, &s).unwrap().f;
        assert!(matches!(
            Census::build(&f, &s),
            Err(PhaseError::WindowTooSmall { .. })
        ));
        let f = f.with_window((-5.0, 5.0)).unwrap();
        assert!(Census::build(&f, &s).is_ok());
    }

    #[test]
    fn cubic_membership_examples() {
        let c = cubic_census();
        let big = c.chains.iter().find(|ch| !ch.trivial).unwrap().id;
        let origin = c.chains.iter().find(|ch| ch.trivial && ch.p.abs() < 1e-9).unwrap().id;
        assert_eq!(c.membership(0.0, 0.1, Region::Component(origin), 1e-3), Membership::Inside);
        let het = c.chains[big]
            .loops
            .iter()
            .find(|l| l.kind == LoopKind::Heteroclinic)
            .unwrap()
            .id;
        assert_eq!(c.membership(1.0, 0.0, Region::LoopInterior(het), 1e-3), Membership::OnBoundary);
        let v = (2.0 * (0.25 - c.potential.value(0.5))).sqrt();
        assert_eq!(c.membership(0.5, v, Region::Chain(big), 1e-6), Membership::OnBoundary);
        assert_eq!(c.membership(0.0, 2.0, Region::Chain(big), 1e-6), Membership::Outside);
        assert_eq!(c.membership(0.0, 0.3, Region::Chain(big), 1e-6), Membership::Inside);
    }

    #[test]
    fn distance_from_origin_to_big_chain() {
        let c = cubic_census();
        let big = c.chains.iter().find(|ch| !ch.trivial).unwrap().id;
        let d = c.distance_to_chain(big, 0.0, 0.0);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-4, "{d}");
    }

    #[test]
    fn curve_points_have_zero_distance_and_exact_level() {
        let c = cubic_census();
        let big = c.chains.iter().find(|ch| !ch.trivial).unwrap().id;
        let pts = c.chain_curve(big).points();
        for &(u, v) in pts.iter().step_by(37) {
            assert!((c.hamiltonian(u, v) - 0.25).abs() < 1e-10);
        }
        assert!(c.chain_curve(big).sup_distance(&c.potential, &pts) < 1e-12);
    }

    #[test]
    fn order_is_consistent() {
        let c = cubic_census();
        assert!(c.order.is_consistent());
    }
}
