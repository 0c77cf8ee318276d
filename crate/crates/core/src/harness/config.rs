//! Flat `key = value` experiment configuration.
//!
//! Resolution order: experiment defaults, then the config file, then
//! `--set` overrides. Every key belongs to a fixed set of experiments; keys
//! outside that set are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::heat::{Grid, StencilOrder};
use crate::hierarchy::Level;
use crate::multigrid::{MgConfig, Smoother, SolvePolicy};
use crate::pfasst::Executor;
use crate::sdc::Iteration;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    Damping,
    OrderStudy,
    VcycleStudy,
    WeakScaling,
    Strong3d,
    SingleRun,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Self::Damping,
        Self::OrderStudy,
        Self::VcycleStudy,
        Self::WeakScaling,
        Self::Strong3d,
        Self::SingleRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Damping => "damping",
            Self::OrderStudy => "order-study",
            Self::VcycleStudy => "vcycle-study",
            Self::WeakScaling => "weak-scaling",
            Self::Strong3d => "strong-3d",
            Self::SingleRun => "single-run",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Sdc,
    Isdc,
    Mlsdc,
    Imlsdc,
    Pfasst,
    Ipfasst,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sdc => "SDC",
            Self::Isdc => "ISDC",
            Self::Mlsdc => "MLSDC",
            Self::Imlsdc => "IMLSDC",
            Self::Pfasst => "PFASST",
            Self::Ipfasst => "IPFASST",
        }
    }

    /// Fixed V-cycle budget instead of full solves.
    pub fn inexact(self) -> bool {
        matches!(self, Self::Isdc | Self::Imlsdc | Self::Ipfasst)
    }

    pub fn multilevel(self) -> bool {
        !matches!(self, Self::Sdc | Self::Isdc)
    }

    pub fn parallel(self) -> bool {
        matches!(self, Self::Pfasst | Self::Ipfasst)
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "SDC" => Self::Sdc,
            "ISDC" => Self::Isdc,
            "MLSDC" => Self::Mlsdc,
            "IMLSDC" => Self::Imlsdc,
            "PFASST" => Self::Pfasst,
            "IPFASST" => Self::Ipfasst,
            _ => return Err(HarnessError::Config(format!("variant: unknown value '{s}'"))),
        })
    }
}

use Experiment::*;

const SOLVERS: &[Experiment] = &[OrderStudy, VcycleStudy, WeakScaling, Strong3d, SingleRun];
const HIERARCHY: &[Experiment] = &[VcycleStudy, WeakScaling, Strong3d, SingleRun];
const PROBLEM: &[Experiment] = &[OrderStudy, VcycleStudy, WeakScaling, Strong3d, SingleRun];

struct KeySpec {
    name: &'static str,
    used_by: &'static [Experiment],
}

const KEYS: &[KeySpec] = &[
    KeySpec { name: "variant", used_by: &[SingleRun] },
    KeySpec { name: "dim", used_by: &[Strong3d, SingleRun] },
    KeySpec { name: "n", used_by: &[OrderStudy, VcycleStudy, Strong3d, SingleRun] },
    KeySpec { name: "k", used_by: PROBLEM },
    KeySpec { name: "nu", used_by: PROBLEM },
    KeySpec { name: "length", used_by: PROBLEM },
    KeySpec { name: "t_end", used_by: PROBLEM },
    KeySpec { name: "steps", used_by: &[Strong3d, SingleRun] },
    KeySpec { name: "ranks", used_by: &[VcycleStudy, Strong3d, SingleRun] },
    KeySpec { name: "executor", used_by: &[VcycleStudy, WeakScaling, Strong3d, SingleRun] },
    KeySpec { name: "levels", used_by: HIERARCHY },
    KeySpec { name: "nodes", used_by: HIERARCHY },
    KeySpec { name: "stencil", used_by: SOLVERS },
    KeySpec { name: "interp", used_by: HIERARCHY },
    KeySpec { name: "smoother", used_by: SOLVERS },
    KeySpec { name: "omega", used_by: SOLVERS },
    KeySpec { name: "pre_sweeps", used_by: SOLVERS },
    KeySpec { name: "post_sweeps", used_by: SOLVERS },
    KeySpec { name: "vcycles", used_by: &[WeakScaling, Strong3d, SingleRun] },
    KeySpec { name: "vcycle_list", used_by: &[VcycleStudy] },
    KeySpec { name: "tol", used_by: &[OrderStudy, Strong3d, SingleRun] },
    KeySpec { name: "max_iter", used_by: SOLVERS },
    KeySpec { name: "orders", used_by: &[Damping, OrderStudy] },
    KeySpec { name: "min_log2_steps", used_by: &[OrderStudy] },
    KeySpec { name: "max_log2_steps", used_by: &[OrderStudy] },
    KeySpec { name: "sizes", used_by: &[WeakScaling] },
    KeySpec { name: "floor_factor", used_by: &[WeakScaling] },
    KeySpec { name: "points", used_by: &[Damping] },
    KeySpec { name: "z_min", used_by: &[Damping] },
    KeySpec { name: "z_max", used_by: &[Damping] },
];

const REQUIRED: &[(Experiment, &[&str])] = &[(SingleRun, &["variant", "n", "steps"])];

fn defaults(e: Experiment) -> Vec<(&'static str, &'static str)> {
    let problem = [("k", "1"), ("nu", "1"), ("length", "1"), ("t_end", "1")];
    let solver = [
        ("smoother", "jacobi"),
        ("omega", "0.6666666666666666"),
        ("pre_sweeps", "2"),
        ("post_sweeps", "2"),
    ];
    let mut d: Vec<(&str, &str)> = Vec::new();
    match e {
        Damping => d.extend([("orders", "2,4"), ("points", "200"), ("z_min", "1e-3"), ("z_max", "1e6")]),
        OrderStudy => {
            d.extend(problem);
            d.extend(solver);
            d.extend([
                ("n", "128"),
                ("stencil", "2"),
                ("orders", "1,2,4,8"),
                ("min_log2_steps", "1"),
                ("max_log2_steps", "12"),
                ("tol", "1e-12"),
                ("max_iter", "50"),
            ]);
        }
        VcycleStudy => {
            d.extend(problem);
            d.extend(solver);
            d.extend([
                ("n", "128"),
                ("ranks", "128"),
                ("executor", "serial"),
                ("levels", "3"),
                ("nodes", "2,2,1"),
                ("stencil", "2"),
                ("interp", "4"),
                ("vcycle_list", "1,2,3,4,5,6,7,8,9,10"),
                ("max_iter", "12"),
            ]);
        }
        WeakScaling => {
            d.extend(problem);
            d.extend(solver);
            d.extend([
                ("smoother", "gs"),
                ("sizes", "32,64,128"),
                ("executor", "serial"),
                ("levels", "3"),
                ("nodes", "2,2,1"),
                ("stencil", "2"),
                ("interp", "4"),
                ("vcycles", "2"),
                ("max_iter", "15"),
                ("floor_factor", "2"),
            ]);
        }
        Strong3d => {
            d.extend(problem);
            d.extend(solver);
            d.extend([
                ("nu", "0.3333333333333333"),
                ("smoother", "jor-rb"),
                ("dim", "3"),
                ("n", "32"),
                ("steps", "24"),
                ("ranks", "24"),
                ("executor", "threaded"),
                ("levels", "2"),
                ("nodes", "4,1"),
                ("stencil", "4,2"),
                ("interp", "4"),
                ("vcycles", "2"),
                ("tol", "1e-9"),
                ("max_iter", "30"),
            ]);
        }
        SingleRun => {
            d.extend(problem);
            d.extend(solver);
            d.extend([
                ("dim", "1"),
                ("ranks", "1"),
                ("executor", "serial"),
                ("levels", "1"),
                ("nodes", "2"),
                ("stencil", "2"),
                ("interp", "4"),
                ("vcycles", "2"),
                ("tol", "1e-9"),
                ("max_iter", "20"),
            ]);
        }
    }
    // later entries override earlier ones
    let mut seen = BTreeMap::new();
    for (k, v) in d {
        seen.insert(k, v);
    }
    KEYS.iter()
        .filter_map(|s| seen.get(s.name).map(|v| (s.name, *v)))
        .collect()
}

/// Raw resolved key/value pairs in canonical key order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    pub experiment: Experiment,
    values: BTreeMap<&'static str, String>,
}

impl RawConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `experiment=… key=value …` in canonical key order.
    pub fn stamp(&self) -> String {
        let mut out = format!("experiment={}", self.experiment);
        for spec in KEYS {
            if let Some(v) = self.values.get(spec.name) {
                out.push_str(&format!(" {}={}", spec.name, v));
            }
        }
        out
    }
}

/// Splits `text` into `(line, key, value)` entries.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(HarnessError::Config(format!("line {}: empty key or value", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn key_spec(experiment: Experiment, key: &str) -> Result<&'static KeySpec, HarnessError> {
    let spec = KEYS
        .iter()
        .find(|s| s.name == key)
        .ok_or_else(|| HarnessError::Config(format!("unknown key '{key}'")))?;
    if !spec.used_by.contains(&experiment) {
        return Err(HarnessError::Config(format!(
            "key '{key}' does not apply to experiment {experiment}"
        )));
    }
    Ok(spec)
}

/// Merges defaults, file text and `key=value` overrides.
pub fn resolve(experiment: Experiment, file: &str, overrides: &[String]) -> Result<RawConfig, HarnessError> {
    let mut values: BTreeMap<&'static str, String> = defaults(experiment)
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect();
    let mut from_file = BTreeMap::new();
    for (line, k, v) in parse_pairs(file)? {
        if k == "experiment" {
            if v != experiment.name() {
                return Err(HarnessError::Config(format!(
                    "line {line}: file is for experiment '{v}', running {experiment}"
                )));
            }
            continue;
        }
        let spec = key_spec(experiment, &k)?;
        if from_file.insert(spec.name, line).is_some() {
            return Err(HarnessError::Config(format!("line {line}: duplicate key '{k}'")));
        }
        values.insert(spec.name, v);
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("override '{o}': expected key=value")))?;
        let spec = key_spec(experiment, k.trim())?;
        values.insert(spec.name, v.trim().to_string());
    }
    let missing: Vec<&str> = REQUIRED
        .iter()
        .filter(|(e, _)| *e == experiment)
        .flat_map(|(_, keys)| keys.iter().copied())
        .filter(|k| !values.contains_key(k))
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::Config(format!("missing required keys: {}", missing.join(", "))));
    }
    Ok(RawConfig { experiment, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherKind {
    Jacobi,
    GaussSeidel,
    JorRedBlack,
}

impl FromStr for SmootherKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "jacobi" => Ok(Self::Jacobi),
            "gs" => Ok(Self::GaussSeidel),
            "jor-rb" => Ok(Self::JorRedBlack),
            _ => Err(HarnessError::Config(format!("smoother: unknown value '{s}' (jacobi|gs|jor-rb)"))),
        }
    }
}

/// Physical problem: heat equation with a sine initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub nu: f64,
    pub length: f64,
    pub t_end: f64,
}

impl Problem {
    pub fn grid(&self) -> Result<Grid, HarnessError> {
        Ok(Grid::new(self.dim, self.n, self.length)?)
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..*self }
    }
}

/// Per-level SDC hierarchy and inner solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub levels: usize,
    /// Sub-steps per level, fine to coarse.
    pub nodes: Vec<usize>,
    /// Stencil order per level, fine to coarse.
    pub stencil: Vec<usize>,
    pub interp: usize,
    pub mg: MgConfig,
    pub policy: SolvePolicy,
    pub stop: Iteration,
}

impl Method {
    /// Levels on `problem`'s grid, halving `N` per level.
    pub fn build_levels(&self, problem: &Problem) -> Result<Vec<Level>, HarnessError> {
        let mut grid = problem.grid()?;
        let mut out = Vec::with_capacity(self.levels);
        for l in 0..self.levels {
            if l > 0 {
                grid = grid.coarsen().ok_or_else(|| {
                    HarnessError::Config(format!("n = {} cannot be coarsened {} times", problem.n, self.levels - 1))
                })?;
            }
            out.push(Level::new(
                grid,
                problem.nu,
                StencilOrder::from_order(self.stencil[l])?,
                self.nodes[l],
                self.mg,
                self.policy,
                self.interp,
            )?);
        }
        Ok(out)
    }
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub experiment: Experiment,
    pub variant: Variant,
    pub problem: Problem,
    pub method: Method,
    /// V-cycles per solve for inexact variants.
    pub vcycles: usize,
    pub steps: usize,
    pub ranks: usize,
    pub executor: Executor,
    pub orders: Vec<usize>,
    pub min_log2_steps: u32,
    pub max_log2_steps: u32,
    pub vcycle_list: Vec<usize>,
    pub sizes: Vec<usize>,
    pub floor_factor: f64,
    pub points: usize,
    pub z_min: f64,
    pub z_max: f64,
}

struct Reader<'a> {
    raw: &'a RawConfig,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> T {
        match self.raw.get(key) {
            None => default,
            Some(s) => match s.parse() {
                Ok(v) => v,
                Err(_) => {
                    self.errors.push(format!("{key}: cannot parse '{s}'"));
                    default
                }
            },
        }
    }

    fn list(&mut self, key: &str) -> Vec<usize> {
        let Some(s) = self.raw.get(key) else {
            return Vec::new();
        };
        let parsed: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse()).collect();
        parsed.unwrap_or_else(|_| {
            self.errors.push(format!("{key}: expected comma-separated integers, got '{s}'"));
            Vec::new()
        })
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.errors.push(msg.into());
        }
    }
}

/// Broadcasts a single value to `levels` entries.
fn per_level(v: Vec<usize>, levels: usize) -> Vec<usize> {
    if v.len() == 1 {
        vec![v[0]; levels]
    } else {
        v
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, HarnessError> {
        let e = raw.experiment;
        let mut r = Reader { raw: &raw, errors: Vec::new() };
        let variant = match e {
            SingleRun => r.parse("variant", Variant::Sdc),
            Damping | OrderStudy => Variant::Sdc,
            VcycleStudy | WeakScaling | Strong3d => Variant::Ipfasst,
        };
        let problem = Problem {
            dim: r.parse("dim", 1),
            n: r.parse("n", 0),
            k: r.parse("k", 1),
            nu: r.parse("nu", 1.0),
            length: r.parse("length", 1.0),
            t_end: r.parse("t_end", 1.0),
        };
        let levels: usize = r.parse("levels", 1);
        let nodes = per_level(r.list("nodes"), levels);
        let stencil = per_level(r.list("stencil"), levels);
        let interp = r.parse("interp", 4);
        let omega: f64 = r.parse("omega", 2.0 / 3.0);
        let smoother = match r.parse("smoother", SmootherKind::Jacobi) {
            SmootherKind::Jacobi => Smoother::WeightedJacobi { omega },
            SmootherKind::GaussSeidel => Smoother::GaussSeidelLex,
            SmootherKind::JorRedBlack => Smoother::JorRedBlack { omega },
        };
        let mg = MgConfig {
            smoother,
            pre_sweeps: r.parse("pre_sweeps", 2),
            post_sweeps: r.parse("post_sweeps", 2),
            ..MgConfig::default()
        };
        let vcycles: usize = r.parse("vcycles", 2);
        let policy = if variant.inexact() {
            SolvePolicy::FixedCycles(vcycles)
        } else {
            SolvePolicy::FULL
        };
        let stop = Iteration {
            tol: r.parse("tol", 0.0),
            max_iter: r.parse("max_iter", 20),
        };
        let method = Method { levels, nodes, stencil, interp, mg, policy, stop };
        let cfg = Self {
            experiment: e,
            variant,
            problem,
            steps: r.parse("steps", 1),
            ranks: r.parse("ranks", 1),
            executor: r.parse("executor", Executor::Serial),
            orders: r.list("orders"),
            min_log2_steps: r.parse("min_log2_steps", 2),
            max_log2_steps: r.parse("max_log2_steps", 12),
            vcycle_list: r.list("vcycle_list"),
            sizes: r.list("sizes"),
            floor_factor: r.parse("floor_factor", 2.0),
            points: r.parse("points", 200),
            z_min: r.parse("z_min", 1e-3),
            z_max: r.parse("z_max", 1e6),
            method,
            vcycles,
            raw: raw.clone(),
        };
        cfg.validate(&mut r);
        if r.errors.is_empty() {
            Ok(cfg)
        } else {
            Err(HarnessError::Config(r.errors.join("; ")))
        }
    }

    fn validate(&self, r: &mut Reader<'_>) {
        let e = self.experiment;
        let p = &self.problem;
        let m = &self.method;
        let uses = |key: &str| KEYS.iter().any(|s| s.name == key && s.used_by.contains(&e));
        if uses("n") {
            r.check(p.n >= 2, "n: must be >= 2");
        }
        if uses("dim") {
            r.check((1..=3).contains(&p.dim), "dim: must be 1, 2 or 3");
        }
        if uses("nu") {
            r.check(p.nu > 0.0 && p.length > 0.0 && p.t_end > 0.0, "nu, length and t_end must be > 0");
            r.check(p.k >= 1, "k: must be >= 1");
        }
        if uses("levels") {
            r.check(m.levels >= 1, "levels: must be >= 1");
            r.check(m.nodes.len() == m.levels, format!("nodes: expected {} entries, got {}", m.levels, m.nodes.len()));
            r.check(m.nodes.iter().all(|&n| n >= 1), "nodes: entries must be >= 1");
            r.check(m.interp == 2 || m.interp == 4, "interp: must be 2 or 4");
        }
        if uses("stencil") {
            let want = if uses("levels") { m.levels } else { 1 };
            r.check(m.stencil.len() == want, format!("stencil: expected {want} entries, got {}", m.stencil.len()));
            r.check(m.stencil.iter().all(|&s| s == 2 || s == 4), "stencil: entries must be 2 or 4");
        }
        if uses("smoother") {
            if let Smoother::WeightedJacobi { omega } | Smoother::JorRedBlack { omega } = m.mg.smoother {
                r.check(omega > 0.0 && omega <= 1.0, "omega: must lie in (0, 1]");
            }
            r.check(m.mg.pre_sweeps + m.mg.post_sweeps >= 1, "pre_sweeps + post_sweeps must be >= 1");
        }
        if uses("max_iter") {
            r.check(m.stop.max_iter >= 1, "max_iter: must be >= 1");
        }
        if uses("tol") {
            r.check(m.stop.tol >= 0.0, "tol: must be >= 0");
        }
        if uses("vcycles") {
            r.check(!self.variant.inexact() || self.vcycles >= 1, "vcycles: must be >= 1");
        }
        match e {
            Damping => {
                r.check(!self.orders.is_empty() && self.orders.iter().all(|&o| o >= 1), "orders: need entries >= 1");
                r.check(self.points >= 2, "points: must be >= 2");
                r.check(self.z_min > 0.0 && self.z_max > self.z_min, "z_min, z_max: need 0 < z_min < z_max");
            }
            OrderStudy => {
                r.check(!self.orders.is_empty() && self.orders.iter().all(|&o| o >= 1), "orders: need entries >= 1");
                r.check(
                    self.min_log2_steps <= self.max_log2_steps && self.max_log2_steps <= 20,
                    "min_log2_steps <= max_log2_steps <= 20 required",
                );
            }
            VcycleStudy => {
                r.check(!self.vcycle_list.is_empty(), "vcycle_list: must not be empty");
                r.check(
                    self.vcycle_list.iter().all(|&v| v >= 1),
                    "vcycle_list: the study needs fixed V-cycle budgets >= 1",
                );
                r.check(self.ranks >= 1, "ranks: must be >= 1");
                r.check(m.levels >= 2, "levels: PFASST needs >= 2 levels");
            }
            WeakScaling => {
                r.check(!self.sizes.is_empty() && self.sizes.iter().all(|&s| s >= 2), "sizes: need entries >= 2");
                r.check(m.levels >= 2, "levels: PFASST needs >= 2 levels");
                r.check(self.floor_factor >= 1.0, "floor_factor: must be >= 1");
            }
            Strong3d | SingleRun => {
                r.check(self.steps >= 1, "steps: must be >= 1");
                r.check(self.ranks >= 1, "ranks: must be >= 1");
                let v = self.variant;
                if v.multilevel() {
                    r.check(m.levels >= 2, format!("variant {}: needs levels >= 2", v.name()));
                } else {
                    r.check(m.levels == 1, format!("variant {}: needs levels = 1", v.name()));
                }
                if v.parallel() {
                    r.check(
                        self.ranks >= 1 && self.steps.is_multiple_of(self.ranks.max(1)),
                        "steps: must be a multiple of ranks",
                    );
                } else {
                    r.check(self.ranks == 1, format!("ranks: variant {} is serial", v.name()));
                }
            }
        }
    }

    /// Method with a different fixed V-cycle budget.
    pub fn method_with_cycles(&self, v: usize) -> Method {
        Method {
            policy: SolvePolicy::FixedCycles(v),
            ..self.method.clone()
        }
    }
}

/// Parses and validates in one go.
pub fn parse_config(experiment: Experiment, file: &str, overrides: &[String]) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::from_raw(resolve(experiment, file, overrides)?)
}
