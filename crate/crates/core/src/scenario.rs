//! Scenario configs, orchestration of census → solve → audits → verdicts, and
//! parameter sweeps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::asymptotics::{
    connection_verdict, estimate_omega, locate_component, morse_partition, near_steady_outside,
    quasiconvergence_verdict, theta_limits, windowed_trajectory, Location, MorsePartition,
    RangeExitCheck, Verdict, VerdictKind, VerdictTolerances,
};
use crate::nonlinearity::{
    classify_scenario, mf_extend, AnalysisSettings, Nonlinearity, NonlinearityError, ScenarioClass,
};
use crate::output::{
    fmt_num, read_snapshots_csv, write_json, write_snapshots_csv, write_trajectories_csv,
    write_zerocounts_csv, SnapshotReadError, ZeroCountRow,
};
use crate::pde::{front_speed, solve, Grid, InitialData, Snapshot, SolverConfig, SolverError};
use crate::phase_plane::{Census, ChainRelation, PhaseError};
use crate::sturm::{
    audit_monotonicity, check_nc, check_r, default_lambdas, reflect, zero_count, DropLog, NcReport,
    RReport, ZeroReport,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_ENV: &str = "CHAINSCOPE_OUT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message} (line {line}, column {column})")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Snapshots(#[from] SnapshotReadError),
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Polynomial coefficients, constant term first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

fn default_blend() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfSpec {
    pub kappa: f64,
    #[serde(default = "default_blend")]
    pub blend_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Companion {
    pub name: String,
    pub initial: InitialData,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditPlan {
    /// Levels β tracked through `u − β`; all equilibria when absent.
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub ux: bool,
    /// Reflection centres; `±{10, 15, …, L − 10}` when absent.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Runs with other initial data whose differences with the main run are tracked.
    #[serde(default)]
    pub companions: Vec<Companion>,
    /// Snapshot times written to trajectories.csv; the last snapshot when empty.
    #[serde(default)]
    pub trajectory_times: Vec<f64>,
}

impl Default for AuditPlan {
    fn default() -> Self {
        Self {
            betas: None,
            ux: true,
            lambdas: None,
            companions: Vec::new(),
            trajectory_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    #[default]
    Quasiconvergence,
    Connection,
    Both,
}

fn default_exit_tol() -> f64 {
    1e-2
}
fn default_residual_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeCheckSpec {
    pub interval: (f64, f64),
    #[serde(default = "default_exit_tol")]
    pub exit_tol: f64,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictPlan {
    #[serde(default)]
    pub plan: PlanKind,
    #[serde(default)]
    pub tolerances: VerdictTolerances,
    /// Component for the connection verdict; located from the mid-run profile when absent.
    #[serde(default)]
    pub component: Option<usize>,
    #[serde(default)]
    pub range_check: Option<RangeCheckSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub mf: Option<MfSpec>,
    /// Admissible range of u; defaults to the extension window.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    pub solver: SolverConfig,
    #[serde(default)]
    pub audit: AuditPlan,
    #[serde(default)]
    pub verdict: VerdictPlan,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

const BUNDLED: &[(&str, &str)] = &[
    ("cubic_front", include_str!("../../../presets/cubic_front.json")),
    ("cubic_big_bump", include_str!("../../../presets/cubic_big_bump.json")),
    ("cubic_connection", include_str!("../../../presets/cubic_connection.json")),
    ("quadratic_subthreshold", include_str!("../../../presets/quadratic_subthreshold.json")),
    ("quadratic_threshold", include_str!("../../../presets/quadratic_threshold.json")),
    ("logistic_boundary", include_str!("../../../presets/logistic_boundary.json")),
    ("reflection_fixture", include_str!("../../../presets/reflection_fixture.json")),
];

pub fn bundled_presets() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_preset(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }

    /// Reads a config file, or a bundled preset when `path` names one and no such file exists.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            if let Some(text) = path.to_str().and_then(bundled_preset) {
                return Self::from_json_str(text);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }

    pub fn build_nonlinearity(&self) -> Result<Nonlinearity, ScenarioError> {
        let spec = &self.nonlinearity;
        let base_window = match self.mf {
            Some(mf) => (-mf.kappa - 1.0, mf.kappa + 1.0),
            None => self.window.unwrap_or((-3.0, 3.0)),
        };
        let base = match (&spec.preset, &spec.coefficients) {
            (Some(name), None) => Nonlinearity::preset(name, base_window)
                .map_err(|e| invalid("nonlinearity.preset", e.to_string()))?,
            (None, Some(c)) => Nonlinearity::polynomial(c.clone(), base_window)
                .map_err(|e| invalid("nonlinearity.coefficients", e.to_string()))?,
            _ => {
                return Err(invalid("nonlinearity", "give exactly one of `preset` or `coefficients`").into())
            }
        };
        let f = match self.mf {
            Some(mf) => mf_extend(&base, mf.kappa, mf.blend_width, &self.analysis)?.f,
            None => base,
        };
        match self.window {
            Some(w) => Ok(f.with_window(w).map_err(|e| invalid("window", e.to_string()))?),
            None => Ok(f),
        }
    }

    /// Checks the config against the nonlinearity and grid; returns what a run needs.
    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            )
            .into());
        }
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty").into());
        }
        let f = self.build_nonlinearity()?;
        let census = Census::build(&f, &self.analysis)?;
        let grid = self.solver.validate(&f).map_err(|e| match e {
            SolverError::InvalidConfig(m) => ScenarioError::Config(invalid("solver", m)),
            other => other.into(),
        })?;
        if let Some(betas) = &self.audit.betas {
            for (i, b) in betas.iter().enumerate() {
                if !census.equilibria.iter().any(|e| (e.value - b).abs() <= 1e-6) {
                    return Err(invalid(format!("audit.betas[{i}]"), format!("{b} is not an equilibrium")).into());
                }
            }
        }
        if let Some(lambdas) = &self.audit.lambdas {
            for (i, l) in lambdas.iter().enumerate() {
                if !(l.abs() < grid.half_width) {
                    return Err(invalid(
                        format!("audit.lambdas[{i}]"),
                        format!("{l} lies outside the grid (−{0}, {0})", grid.half_width),
                    )
                    .into());
                }
            }
        }
        for (i, c) in self.audit.companions.iter().enumerate() {
            let cfg = SolverConfig {
                initial: c.initial.clone(),
                ..self.solver.clone()
            };
            if let Err(e) = cfg.validate(&f) {
                return Err(invalid(format!("audit.companions[{i}].initial"), e.to_string()).into());
            }
        }
        if let Some(id) = self.verdict.component {
            if id >= census.components.len() {
                return Err(invalid(
                    "verdict.component",
                    format!("no component {id} (have {})", census.components.len()),
                )
                .into());
            }
        }
        let tol = &self.verdict.tolerances;
        if !(tol.chain_tol > 0.0 && tol.ut_tol > 0.0 && tol.steady_tol > 0.0 && tol.probe_window > 0.0) {
            return Err(invalid("verdict.tolerances", "tolerances and probe_window must be positive").into());
        }
        if !(tol.tail_fraction > 0.0 && tol.tail_fraction <= 1.0) {
            return Err(invalid("verdict.tolerances.tail_fraction", "must lie in (0, 1]").into());
        }
        let scenario_class = classify_scenario(&f, &census.equilibria).ok();
        Ok(Prepared {
            f,
            census,
            grid,
            scenario_class,
        })
    }

    pub fn betas(&self, census: &Census) -> Vec<f64> {
        self.audit
            .betas
            .clone()
            .unwrap_or_else(|| census.equilibria.iter().map(|e| e.value).collect())
    }

    pub fn lambdas(&self, grid: &Grid) -> Vec<f64> {
        self.audit
            .lambdas
            .clone()
            .unwrap_or_else(|| default_lambdas(grid.half_width))
    }
}

pub struct Prepared {
    pub f: Nonlinearity,
    pub census: Census,
    pub grid: Grid,
    pub scenario_class: Option<ScenarioClass>,
}

/// `$CHAINSCOPE_OUT/<name>` when the variable is set, else the configured
/// `output_dir`, else `out/<name>`.
pub fn output_dir(scenario: &Scenario) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(&scenario.name),
        _ => scenario
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name)),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn json_out<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), ScenarioError> {
    let path = dir.join(name);
    write_json(&path, value).map_err(|e| io_err(&path, e))
}

#[derive(Serialize)]
struct ChainsFile<'a> {
    nonlinearity: &'a str,
    window: (f64, f64),
    scenario_class: Option<ScenarioClass>,
    equilibria: &'a [crate::nonlinearity::Equilibrium],
    chains: Vec<ChainOut>,
}

#[derive(Serialize)]
struct ChainOut {
    id: usize,
    trivial: bool,
    p: f64,
    q: f64,
    energy: f64,
    saddles: Vec<f64>,
    beta: (f64, f64),
    loops: Vec<LoopOut>,
}

#[derive(Serialize)]
struct LoopOut {
    id: usize,
    kind: crate::phase_plane::LoopKind,
    anchors: (f64, f64),
    energy: f64,
    saddles: Vec<f64>,
}

#[derive(Serialize)]
struct OrderFile {
    /// `[i, j]`: chain i lies in the interior of chain j.
    inside: Vec<(usize, usize)>,
    relations: Vec<Vec<ChainRelation>>,
    consistent: bool,
}

/// Writes chains.json, components.json and order.json.
pub fn write_census(dir: &Path, prepared: &Prepared) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let census = &prepared.census;
    let chains = census
        .chains
        .iter()
        .map(|c| ChainOut {
            id: c.id,
            trivial: c.trivial,
            p: c.p,
            q: c.q,
            energy: c.energy,
            saddles: c.saddles.clone(),
            beta: census.beta_pm(c.id),
            loops: c
                .loops
                .iter()
                .map(|l| LoopOut {
                    id: l.id,
                    kind: l.kind,
                    anchors: l.anchors(),
                    energy: l.energy,
                    saddles: l.saddles.clone(),
                })
                .collect(),
        })
        .collect();
    json_out(
        dir,
        "chains.json",
        &ChainsFile {
            nonlinearity: prepared.f.label(),
            window: prepared.f.window(),
            scenario_class: prepared.scenario_class,
            equilibria: &census.equilibria,
            chains,
        },
    )?;
    json_out(dir, "components.json", &census.components)?;
    let n = census.chains.len();
    let inside = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| census.order.inside(i, j))
        .collect();
    json_out(
        dir,
        "order.json",
        &OrderFile {
            inside,
            relations: census.order.relations.clone(),
            consistent: census.order.is_consistent(),
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicitySummary {
    pub reports: usize,
    pub violations: Vec<(f64, f64)>,
    pub unexplained_drops: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NcRReport {
    pub nc: NcReport,
    pub r: RReport,
    pub monotonicity: BTreeMap<String, MonotonicitySummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaSummary {
    pub sample_times: Vec<f64>,
    pub settle_metric: f64,
    pub ut_metric: f64,
    pub settled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictFile {
    #[serde(flatten)]
    pub primary: Verdict,
    pub connection: Option<Verdict>,
    pub location: Option<Location>,
    pub omega: Option<OmegaSummary>,
    pub morse_partition: Option<MorsePartition>,
    pub morse_error: Option<String>,
    pub range_check: Option<RangeExitCheck>,
}

pub struct Analysis {
    pub zero_rows: Vec<ZeroCountRow>,
    pub nc_r: NcRReport,
    pub verdict: VerdictFile,
}

fn interior(grid: &Grid) -> (f64, f64) {
    (grid.x(1), grid.x(grid.n - 2))
}

fn track_rows(
    id: &str,
    series: impl Iterator<Item = (f64, (f64, f64), Result<ZeroReport, String>)>,
    rows: &mut Vec<ZeroCountRow>,
    monotonicity: &mut BTreeMap<String, MonotonicitySummary>,
) {
    let mut defined = Vec::new();
    for (t, interval, rep) in series {
        match rep {
            Ok(r) => {
                rows.push(ZeroCountRow {
                    functional_id: id.to_string(),
                    t,
                    interval: r.interval,
                    count: Some(r.count),
                    n_multiples: r.multiples.len(),
                });
                defined.push((t, r));
            }
            Err(_) => rows.push(ZeroCountRow {
                functional_id: id.to_string(),
                t,
                interval,
                count: None,
                n_multiples: 0,
            }),
        }
    }
    let log: DropLog = audit_monotonicity(&defined);
    monotonicity.insert(
        id.to_string(),
        MonotonicitySummary {
            reports: defined.len(),
            violations: log.violations,
            unexplained_drops: log.unexplained_drops.len(),
        },
    );
}

/// Zero-number audits, (NC)/(R) checks and verdicts on a finished snapshot series.
pub fn analyze(
    scenario: &Scenario,
    prepared: &Prepared,
    snapshots: &[Snapshot],
    companions: &[(String, Vec<Snapshot>)],
) -> Analysis {
    let census = &prepared.census;
    let mut rows = Vec::new();
    let mut monotonicity = BTreeMap::new();

    for beta in scenario.betas(census) {
        let id = format!("u-beta[{}]", fmt_num(beta));
        let series = snapshots.iter().map(|s| {
            let iv = interior(&s.grid);
            let v: Vec<f64> = s.u.iter().map(|u| u - beta).collect();
            (s.t, iv, zero_count(&v, &s.xs(), iv, None).map_err(|e| e.to_string()))
        });
        track_rows(&id, series, &mut rows, &mut monotonicity);
    }
    if scenario.audit.ux {
        let series = snapshots.iter().map(|s| {
            let iv = interior(&s.grid);
            (s.t, iv, zero_count(&s.ux, &s.xs(), iv, None).map_err(|e| e.to_string()))
        });
        track_rows("ux", series, &mut rows, &mut monotonicity);
    }
    let lambdas = scenario.lambdas(&prepared.grid);
    for &lambda in &lambdas {
        let id = format!("V_lambda[{}]", fmt_num(lambda));
        let series = snapshots.iter().map(|s| match reflect(s, lambda) {
            Ok(r) => {
                let iv = (r.xs[0], r.xs[r.xs.len() - 1]);
                (s.t, iv, zero_count(&r.values, &r.xs, iv, None).map_err(|e| e.to_string()))
            }
            Err(e) => (s.t, (lambda, lambda), Err(e.to_string())),
        });
        track_rows(&id, series, &mut rows, &mut monotonicity);
    }
    for (name, other) in companions {
        let id = format!("u-companion[{name}]");
        let series = snapshots.iter().zip(other).map(|(s, o)| {
            let iv = interior(&s.grid);
            let v: Vec<f64> = s.u.iter().zip(&o.u).map(|(a, b)| a - b).collect();
            (s.t, iv, zero_count(&v, &s.xs(), iv, None).map_err(|e| e.to_string()))
        });
        track_rows(&id, series, &mut rows, &mut monotonicity);
    }
    let nc_r = NcRReport {
        nc: check_nc(snapshots),
        r: check_r(snapshots, &lambdas),
        monotonicity,
    };
    let verdict = verdicts(scenario, prepared, snapshots);
    Analysis {
        zero_rows: rows,
        nc_r,
        verdict,
    }
}

fn verdicts(scenario: &Scenario, prepared: &Prepared, snapshots: &[Snapshot]) -> VerdictFile {
    let census = &prepared.census;
    let f = &prepared.f;
    let tols = scenario.verdict.tolerances;
    let plan = scenario.verdict.plan;
    let horizon = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let max_step = 0.5 * scenario.solver.dt;
    let inconclusive = |reason: String| Verdict {
        kind: VerdictKind::Inconclusive { reason },
        distances: BTreeMap::new(),
        theta_limits: None,
        tolerances: tols,
        probe_window: tols.probe_window,
        horizon,
    };

    let mut omega = None;
    let mut morse = None;
    let mut morse_error = None;
    let mut range_check = None;
    let quasi = matches!(plan, PlanKind::Quasiconvergence | PlanKind::Both).then(|| {
        match estimate_omega(snapshots, f, tols.probe_window, tols.tail_fraction) {
            Ok(est) => {
                let mut v = quasiconvergence_verdict(&est, census, &tols);
                let chain = v.chain_id().filter(|&c| !census.chains[c].trivial);
                v.theta_limits = Some(theta_limits(snapshots, census, max_step, chain));
                match morse_partition(&est, census, &tols) {
                    Ok(p) => morse = Some(p),
                    Err(e) => morse_error = Some(e.to_string()),
                }
                if let Some(rc) = scenario.verdict.range_check {
                    range_check = Some(near_steady_outside(&est, f, rc.interval, rc.exit_tol, rc.residual_tol));
                }
                omega = Some(OmegaSummary {
                    sample_times: est.sample_times.clone(),
                    settle_metric: est.settle_metric,
                    ut_metric: est.ut_metric,
                    settled: est.is_settled(&tols),
                });
                v
            }
            Err(e) => inconclusive(e.to_string()),
        }
    });

    let mut location = None;
    let connection = matches!(plan, PlanKind::Connection | PlanKind::Both).then(|| {
        let component = match scenario.verdict.component {
            Some(c) => Ok(c),
            None => {
                let mid = snapshots
                    .iter()
                    .min_by(|a, b| (a.t - 0.5 * horizon).abs().total_cmp(&(b.t - 0.5 * horizon).abs()));
                match mid.map(|s| locate_component(census, &windowed_trajectory(s, tols.probe_window), tols.band)) {
                    Some(Ok(loc)) => {
                        location = Some(loc);
                        match loc {
                            Location::Component(c) => Ok(c),
                            Location::OnChain(c) => Err(format!("mid-run profile lies on chain {c}")),
                        }
                    }
                    Some(Err(e)) => Err(format!("could not locate component: {e}")),
                    None => Err("no snapshots".to_string()),
                }
            }
        };
        match component {
            Ok(c) => {
                let mut v = connection_verdict(snapshots, c, census, &tols);
                let inner = census.components[c].inner_chain;
                let chain = (!census.chains[inner].trivial).then_some(inner);
                v.theta_limits = Some(theta_limits(snapshots, census, max_step, chain));
                v
            }
            Err(reason) => inconclusive(reason),
        }
    });

    let (primary, connection) = match (quasi, connection) {
        (Some(q), c) => (q, c),
        (None, Some(c)) => (c, None),
        (None, None) => unreachable!("plan selects at least one verdict"),
    };
    VerdictFile {
        primary,
        connection,
        location,
        omega,
        morse_partition: morse,
        morse_error,
        range_check,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub dir: PathBuf,
    pub kind: String,
    pub chain_id: Option<usize>,
    pub settle_metric: Option<f64>,
    pub ut_metric: Option<f64>,
    pub final_sup: f64,
    pub morse_groups: Option<usize>,
    pub verdict: Verdict,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    name: &'a str,
    schema_version: u32,
    crate_version: &'a str,
    created_unix_seconds: u64,
    grid: Grid,
    steps: usize,
    snapshots: usize,
    dt_max: f64,
    front_speed: f64,
    config: &'a Scenario,
}

fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    prepared: &Prepared,
    snapshots: &[Snapshot],
    analysis: &Analysis,
) -> Result<(), ScenarioError> {
    let path = dir.join("zerocounts.csv");
    write_zerocounts_csv(&path, &analysis.zero_rows).map_err(|e| io_err(&path, e))?;
    json_out(dir, "nc_r_report.json", &analysis.nc_r)?;
    json_out(dir, "verdict.json", &analysis.verdict)?;
    let wanted: Vec<&Snapshot> = if scenario.audit.trajectory_times.is_empty() {
        snapshots.last().into_iter().collect()
    } else {
        scenario
            .audit
            .trajectory_times
            .iter()
            .filter_map(|&t| {
                snapshots
                    .iter()
                    .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            })
            .collect()
    };
    let path = dir.join("trajectories.csv");
    write_trajectories_csv(&path, &wanted).map_err(|e| io_err(&path, e))?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json_out(
        dir,
        "run_meta.json",
        &RunMeta {
            name: &scenario.name,
            schema_version: SCHEMA_VERSION,
            crate_version: env!("CARGO_PKG_VERSION"),
            created_unix_seconds: created,
            grid: prepared.grid,
            steps: scenario.solver.step_count(),
            snapshots: snapshots.len(),
            dt_max: SolverConfig::dt_max(&prepared.f),
            front_speed: front_speed(&prepared.f),
            config: scenario,
        },
    )
}

fn summarize(scenario: &Scenario, dir: &Path, snapshots: &[Snapshot], analysis: &Analysis) -> RunSummary {
    let v = &analysis.verdict;
    RunSummary {
        name: scenario.name.clone(),
        dir: dir.to_path_buf(),
        kind: v.primary.kind_name().to_string(),
        chain_id: v.primary.chain_id(),
        settle_metric: v.omega.as_ref().map(|o| o.settle_metric),
        ut_metric: v.omega.as_ref().map(|o| o.ut_metric),
        final_sup: snapshots.last().map(|s| s.sup_norm()).unwrap_or(0.0),
        morse_groups: v.morse_partition.as_ref().map(|m| m.groups.len()),
        verdict: v.primary.clone(),
    }
}

/// Census only: chains.json, components.json, order.json.
pub fn analyze_f(scenario: &Scenario, dir: &Path) -> Result<Prepared, ScenarioError> {
    let prepared = scenario.prepare()?;
    write_census(dir, &prepared)?;
    Ok(prepared)
}

/// Full run into `dir`.
pub fn run_in(scenario: &Scenario, dir: &Path) -> Result<RunSummary, ScenarioError> {
    let prepared = scenario.prepare()?;
    write_census(dir, &prepared)?;
    let snapshots = solve(&scenario.solver, &prepared.f)?;
    let path = dir.join("snapshots.csv");
    write_snapshots_csv(&path, &snapshots).map_err(|e| io_err(&path, e))?;
    let companions = scenario
        .audit
        .companions
        .iter()
        .map(|c| {
            let cfg = SolverConfig {
                initial: c.initial.clone(),
                ..scenario.solver.clone()
            };
            solve(&cfg, &prepared.f).map(|s| (c.name.clone(), s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let analysis = analyze(scenario, &prepared, &snapshots, &companions);
    write_outputs(dir, scenario, &prepared, &snapshots, &analysis)?;
    Ok(summarize(scenario, dir, &snapshots, &analysis))
}

/// Full run into [`output_dir`].
pub fn run(scenario: &Scenario) -> Result<RunSummary, ScenarioError> {
    run_in(scenario, &output_dir(scenario))
}

/// Audits and verdicts on an existing snapshots.csv (no solve, no companions).
pub fn verdict_from_snapshots(
    scenario: &Scenario,
    snapshots_csv: &Path,
    dir: &Path,
) -> Result<RunSummary, ScenarioError> {
    let prepared = scenario.prepare()?;
    let snapshots = read_snapshots_csv(snapshots_csv)?;
    write_census(dir, &prepared)?;
    let analysis = analyze(scenario, &prepared, &snapshots, &[]);
    write_outputs(dir, scenario, &prepared, &snapshots, &analysis)?;
    Ok(summarize(scenario, dir, &snapshots, &analysis))
}

/// Copy of `template` with the numeric field at dotted `axis` set to `value`.
/// Array elements are addressed by index, e.g. `solver.initial.bumps.0.amplitude`.
pub fn materialize(template: &Scenario, axis: &str, value: f64) -> Result<Scenario, ConfigError> {
    let mut root = template.to_json_value();
    let mut node = &mut root;
    for seg in axis.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(move |i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| invalid(axis, format!("no field `{seg}` in the config")))?;
    }
    if !node.is_number() {
        return Err(invalid(axis, "sweep axis must be a numeric field"));
    }
    *node = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| invalid(axis, "sweep value must be finite"))?;
    serde_path_to_error::deserialize(root).map_err(|e| {
        let path = e.path().to_string();
        invalid(path, e.into_inner().to_string())
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    /// Verdict kind, or `error` when the run failed.
    pub kind: String,
    pub chain_id: Option<usize>,
    pub settle_metric: Option<f64>,
    pub ut_metric: Option<f64>,
    pub final_sup: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    /// Last value before and first value after the first change of outcome.
    pub bracket: Option<(f64, f64)>,
}

fn outcome(row: &SweepRow) -> (String, Option<usize>) {
    (row.kind.clone(), row.chain_id)
}

/// Runs `template` once per value on a pool of `workers` threads; run `i`
/// writes into `<root>/sweep/<i>`. Failed runs become `error` rows.
pub fn sweep(
    template: &Scenario,
    axis: &str,
    values: &[f64],
    workers: usize,
    root: &Path,
) -> Result<SweepSummary, ScenarioError> {
    let scenarios = values
        .iter()
        .map(|&v| materialize(template, axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| io_err(root, e))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        scenarios
            .par_iter()
            .enumerate()
            .map(|(index, sc)| {
                let dir = root.join("sweep").join(index.to_string());
                match run_in(sc, &dir) {
                    Ok(s) => SweepRow {
                        index,
                        value: values[index],
                        kind: s.kind,
                        chain_id: s.chain_id,
                        settle_metric: s.settle_metric,
                        ut_metric: s.ut_metric,
                        final_sup: Some(s.final_sup),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        index,
                        value: values[index],
                        kind: "error".into(),
                        chain_id: None,
                        settle_metric: None,
                        ut_metric: None,
                        final_sup: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let bracket = rows
        .windows(2)
        .find(|w| outcome(&w[0]) != outcome(&w[1]))
        .map(|w| (w[0].value, w[1].value));
    let summary = SweepSummary {
        axis: axis.to_string(),
        rows,
        bracket,
    };
    std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
    json_out(root, "sweep.json", &summary)?;
    let path = root.join("sweep.csv");
    write_sweep_csv(&path, &summary).map_err(|e| io_err(&path, e))?;
    Ok(summary)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn write_sweep_csv(path: &Path, summary: &SweepSummary) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "value", "kind", "chain_id", "settle_metric", "ut_metric", "final_sup", "error"])?;
    for r in &summary.rows {
        w.write_record([
            r.index.to_string(),
            fmt_num(r.value),
            r.kind.clone(),
            r.chain_id.map(|c| c.to_string()).unwrap_or_default(),
            opt(r.settle_metric),
            opt(r.ut_metric),
            opt(r.final_sup),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_presets_parse_and_prepare() {
        for name in bundled_presets() {
            let sc = Scenario::from_json_str(bundled_preset(name).unwrap())
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sc.name, name);
            sc.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text = bundled_preset("cubic_front").unwrap().replace("\"dx\"", "\"dxx\"");
        let err = Scenario::from_json_str(&text).unwrap_err();
        match err {
            ConfigError::Parse { path, .. } => assert!(path.starts_with("solver"), "{path}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn lambda_outside_grid_is_rejected() {
        let mut sc = Scenario::from_json_str(bundled_preset("cubic_front").unwrap()).unwrap();
        sc.audit.lambdas = Some(vec![5.0, 500.0]);
        match sc.prepare() {
            Err(ScenarioError::Config(ConfigError::Invalid { field, .. })) => {
                assert_eq!(field, "audit.lambdas[1]")
            }
            Err(e) => panic!("{e}"),
            Ok(_) => panic!("accepted"),
        }
    }

    #[test]
    fn non_equilibrium_beta_is_rejected() {
        let mut sc = Scenario::from_json_str(bundled_preset("cubic_front").unwrap()).unwrap();
        sc.audit.betas = Some(vec![0.5]);
        assert!(matches!(
            sc.prepare(),
            Err(ScenarioError::Config(ConfigError::Invalid { .. }))
        ));
    }

    #[test]
    fn materialize_sets_nested_fields() {
        let sc = Scenario::from_json_str(bundled_preset("quadratic_threshold").unwrap()).unwrap();
        let m = materialize(&sc, "solver.initial.amplitude", 1.25).unwrap();
        match m.solver.initial {
            InitialData::CompactBump { amplitude, .. } => assert_eq!(amplitude, 1.25),
            _ => panic!("kind changed"),
        }
        assert!(materialize(&sc, "solver.nope", 1.0).is_err());
        assert!(materialize(&sc, "name", 1.0).is_err());
    }
}
