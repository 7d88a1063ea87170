//! Experiment configuration.
//!
//! A config is a TOML document. Top-level keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `experiment` | `tail`, `cdf-H`, `cf-V`, `fixed-point`, `bounds`, `baseline`, `ode-residual` or `martingale` |
//! | `seed` | master seed (required) |
//! | `t` | time or list of times |
//! | `xs` | thresholds |
//! | `xis` | characteristic-function arguments |
//! | `samples` | Monte Carlo sample count `N` |
//! | `pool_size`, `iterations` | `Z` pool size and fixed-point sweeps (default `100000`, `60`) |
//! | `sizes` | list of `n` (baseline, martingale, equal-weight bounds) |
//! | `weights` | explicit weight vector (bounds) |
//! | `epsilon`, `gamma` | bound parameters (default `0.5`, `0.75`) |
//! | `delta` | time step of the kinetic residual |
//! | `admissibility_epsilon` | `ε` of the threshold check (default `min(0.25, α/2)`) |
//! | `workers`, `chunk_size` | parallelism (default `1`, `10000`) |
//! | `output`, `format`, `pool_output` | destinations; `format` must be `csv` |
//!
//! `[kernel]` has `kind` = `kac`, `deterministic` (`left`, `right`),
//! `steady-state` (`alpha`, defaults to the law's) or `mixture`
//! (`atoms = [[left, right, prob], ...]`).
//!
//! `[initial]` has `kind` = `symmetric-pareto` (`alpha`, `xmin`) or
//! `asymmetric-pareto` (`alpha`, `c_plus`, `c_minus`), and an optional
//! `gamma0` that must agree with the law.
//!
//! Every problem found is reported, not only the first.

use std::path::PathBuf;
use std::str::FromStr;

use toml::{Table, Value};

use crate::initial_data::InitialLaw;
use crate::kernels::{Atom, CollisionKernel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Tail,
    CdfH,
    CfV,
    FixedPoint,
    Bounds,
    Baseline,
    OdeResidual,
    Martingale,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::Tail,
        Self::CdfH,
        Self::CfV,
        Self::FixedPoint,
        Self::Bounds,
        Self::Baseline,
        Self::OdeResidual,
        Self::Martingale,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Tail => "tail",
            Self::CdfH => "cdf-H",
            Self::CfV => "cf-V",
            Self::FixedPoint => "fixed-point",
            Self::Bounds => "bounds",
            Self::Baseline => "baseline",
            Self::OdeResidual => "ode-residual",
            Self::Martingale => "martingale",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Kac,
    Deterministic { left: f64, right: f64 },
    SteadyState { alpha: f64 },
    Mixture(Vec<Atom>),
}

impl KernelSpec {
    pub fn build(&self) -> Result<CollisionKernel> {
        match self {
            Self::Kac => Ok(CollisionKernel::kac()),
            Self::Deterministic { left, right } => CollisionKernel::deterministic(*left, *right),
            Self::SteadyState { alpha } => CollisionKernel::steady_state(*alpha),
            Self::Mixture(atoms) => CollisionKernel::mixture(atoms.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LawSpec {
    SymmetricPareto { alpha: f64, xmin: f64 },
    AsymmetricPareto { alpha: f64, c_plus: f64, c_minus: f64 },
}

impl LawSpec {
    pub fn alpha(&self) -> f64 {
        match self {
            Self::SymmetricPareto { alpha, .. } | Self::AsymmetricPareto { alpha, .. } => *alpha,
        }
    }

    pub fn build(&self) -> Result<InitialLaw> {
        match self {
            Self::SymmetricPareto { alpha, xmin } => InitialLaw::symmetric_pareto(*alpha, *xmin),
            Self::AsymmetricPareto { alpha, c_plus, c_minus } => {
                InitialLaw::asymmetric_pareto(*alpha, *c_plus, *c_minus)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub kernel: KernelSpec,
    pub initial: LawSpec,
    pub seed: u64,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub xis: Vec<f64>,
    pub samples: u64,
    pub pool_size: usize,
    pub iterations: usize,
    pub sizes: Vec<usize>,
    pub weights: Option<Vec<f64>>,
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub admissibility_epsilon: f64,
    pub workers: usize,
    pub chunk_size: usize,
    pub output: Option<PathBuf>,
    pub pool_output: Option<PathBuf>,
    /// The resolved document (after overrides), echoed next to results.
    pub document: Table,
}

const TOP_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "t",
    "xs",
    "xis",
    "samples",
    "pool_size",
    "iterations",
    "sizes",
    "weights",
    "epsilon",
    "gamma",
    "delta",
    "admissibility_epsilon",
    "workers",
    "chunk_size",
    "output",
    "format",
    "pool_output",
    "kernel",
    "initial",
];

/// Apply `KEY=VALUE` overrides (dotted keys reach into blocks). `VALUE` is
/// read as a TOML value, falling back to a bare string.
pub fn apply_overrides(doc: &mut Table, overrides: &[String]) -> Result<()> {
    let mut errors = Vec::new();
    for item in overrides {
        let Some((key, raw)) = item.split_once('=') else {
            errors.push(format!("override `{item}` is not KEY=VALUE"));
            continue;
        };
        let value = parse_value(raw.trim());
        let path: Vec<&str> = key.trim().split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            errors.push(format!("override key `{key}` is malformed"));
            continue;
        }
        if let Err(part) = set_path(doc, &path, value) {
            errors.push(format!("override `{key}`: `{part}` is not a block"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errors))
    }
}

fn set_path(table: &mut Table, path: &[&str], value: Value) -> std::result::Result<(), String> {
    if let [last] = path {
        table.insert(last.to_string(), value);
        return Ok(());
    }
    let entry = table
        .entry(path[0].to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => set_path(t, &path[1..], value),
        _ => Err(path[0].to_string()),
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &[])
}

pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("malformed document: {}", e.message())]))?;
    apply_overrides(&mut doc, overrides)?;
    validate(doc)
}

struct Reader<'a> {
    table: &'a Table,
    prefix: &'a str,
    errors: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn name(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                let msg = format!("`{}` must be a number, got {}", self.name(key), other.type_str());
                self.errors.push(msg);
                None
            }
        }
    }

    fn count(&mut self, key: &str) -> Option<u64> {
        match self.table.get(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as u64),
            Value::Float(v) if *v >= 0.0 && v.fract() == 0.0 && *v < 1.8e19 => Some(*v as u64),
            _ => {
                let msg = format!("`{}` must be a non-negative integer", self.name(key));
                self.errors.push(msg);
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.table.get(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                let msg = format!("`{}` must be a string", self.name(key));
                self.errors.push(msg);
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.table.get(key)?;
        let items = match v {
            Value::Array(a) => a.clone(),
            Value::Float(_) | Value::Integer(_) => vec![v.clone()],
            _ => {
                let msg = format!("`{}` must be a number or a list of numbers", self.name(key));
                self.errors.push(msg);
                return None;
            }
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) => out.push(f),
                Value::Integer(i) => out.push(i as f64),
                _ => {
                    let msg = format!("`{}` must contain only numbers", self.name(key));
                    self.errors.push(msg);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn counts(&mut self, key: &str) -> Option<Vec<usize>> {
        let xs = self.floats(key)?;
        if xs.iter().any(|&x| !(x >= 1.0 && x.fract() == 0.0)) {
            let msg = format!("`{}` must contain positive integers", self.name(key));
            self.errors.push(msg);
            return None;
        }
        Some(xs.into_iter().map(|x| x as usize).collect())
    }

    fn unknown(&mut self, allowed: &[&str]) {
        for key in self.table.keys() {
            if !allowed.contains(&key.as_str()) {
                let msg = format!("unknown key `{}`", self.name(key));
                self.errors.push(msg);
            }
        }
    }
}

fn read_kernel(block: Option<&Value>, law_alpha: Option<f64>, errors: &mut Vec<String>) -> Option<KernelSpec> {
    let Some(value) = block else {
        errors.push("missing [kernel] block".into());
        return None;
    };
    let Value::Table(table) = value else {
        errors.push("`kernel` must be a block".into());
        return None;
    };
    let mut r = Reader { table, prefix: "kernel", errors };
    let kind = r.string("kind");
    let spec = match kind.as_deref() {
        None => {
            r.errors.push("missing `kernel.kind`".into());
            None
        }
        Some("kac") => {
            r.unknown(&["kind"]);
            Some(KernelSpec::Kac)
        }
        Some("deterministic") => {
            r.unknown(&["kind", "left", "right"]);
            match (r.float("left"), r.float("right")) {
                (Some(left), Some(right)) => Some(KernelSpec::Deterministic { left, right }),
                _ => {
                    r.errors.push("deterministic kernel needs `left` and `right`".into());
                    None
                }
            }
        }
        Some("steady-state") => {
            r.unknown(&["kind", "alpha"]);
            r.float("alpha").or(law_alpha).map(|alpha| KernelSpec::SteadyState { alpha })
        }
        Some("mixture") => {
            r.unknown(&["kind", "atoms"]);
            let atoms = match table.get("atoms") {
                Some(Value::Array(list)) => list
                    .iter()
                    .map(|a| match a {
                        Value::Array(v) if v.len() == 3 => {
                            let nums: Vec<f64> = v
                                .iter()
                                .filter_map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                                .collect();
                            (nums.len() == 3).then(|| Atom { left: nums[0], right: nums[1], prob: nums[2] })
                        }
                        _ => None,
                    })
                    .collect::<Option<Vec<_>>>(),
                _ => None,
            };
            match atoms {
                Some(a) => Some(KernelSpec::Mixture(a)),
                None => {
                    r.errors.push("`kernel.atoms` must be a list of [left, right, prob]".into());
                    None
                }
            }
        }
        Some(other) => {
            r.errors.push(format!("unknown kernel kind `{other}`"));
            None
        }
    };
    let spec = spec?;
    match spec.build() {
        Ok(k) if !k.is_nondegenerate() => {
            errors.push("kernel violates P{L>0} + P{R>0} > 1".into());
            None
        }
        Ok(_) => Some(spec),
        Err(e) => {
            errors.push(format!("kernel: {e}"));
            None
        }
    }
}

fn read_law(block: Option<&Value>, errors: &mut Vec<String>) -> Option<LawSpec> {
    let Some(value) = block else {
        errors.push("missing [initial] block".into());
        return None;
    };
    let Value::Table(table) = value else {
        errors.push("`initial` must be a block".into());
        return None;
    };
    let mut r = Reader { table, prefix: "initial", errors };
    let kind = r.string("kind");
    let alpha = r.float("alpha");
    let gamma0 = r.float("gamma0");
    if alpha.is_none() {
        r.errors.push("missing `initial.alpha`".into());
    }
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 2.0) {
            r.errors.push(format!("initial.alpha = {a} must lie in (0, 2)"));
        }
    }
    let spec = match kind.as_deref() {
        None => {
            r.errors.push("missing `initial.kind`".into());
            None
        }
        Some("symmetric-pareto") => {
            r.unknown(&["kind", "alpha", "xmin", "gamma0"]);
            let xmin = r.float("xmin").unwrap_or(1.0);
            alpha.map(|alpha| LawSpec::SymmetricPareto { alpha, xmin })
        }
        Some("asymmetric-pareto") => {
            r.unknown(&["kind", "alpha", "c_plus", "c_minus", "gamma0"]);
            let (cp, cm) = (r.float("c_plus"), r.float("c_minus"));
            if let (Some(a), Some(cp), Some(cm)) = (alpha, cp, cm) {
                if a == 1.0 && cp != cm {
                    r.errors.push(format!(
                        "alpha = 1 requires c_plus = c_minus (got {cp} and {cm})"
                    ));
                    return None;
                }
            }
            match (alpha, cp, cm) {
                (Some(alpha), Some(c_plus), Some(c_minus)) => {
                    Some(LawSpec::AsymmetricPareto { alpha, c_plus, c_minus })
                }
                _ => {
                    r.errors.push("asymmetric-pareto needs `c_plus` and `c_minus`".into());
                    None
                }
            }
        }
        Some(other) => {
            r.errors.push(format!("unknown initial kind `{other}`"));
            None
        }
    };
    let spec = spec?;
    if !(spec.alpha() > 0.0 && spec.alpha() < 2.0) {
        return None;
    }
    match spec.build() {
        Ok(law) => {
            if let Some(g) = gamma0 {
                if (g - law.gamma0()).abs() > 1e-12 {
                    errors.push(format!(
                        "initial.gamma0 = {g} disagrees with the law's value {}",
                        law.gamma0()
                    ));
                }
            }
            Some(spec)
        }
        Err(e) => {
            errors.push(format!("initial: {e}"));
            None
        }
    }
}

fn validate(doc: Table) -> Result<ExperimentConfig> {
    let mut errors = Vec::new();
    let law = read_law(doc.get("initial"), &mut errors);
    let kernel = read_kernel(doc.get("kernel"), law.as_ref().map(LawSpec::alpha), &mut errors);

    let mut r = Reader { table: &doc, prefix: "", errors: &mut errors };
    r.unknown(TOP_KEYS);
    let experiment = match r.string("experiment") {
        Some(s) => match s.parse::<ExperimentKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                r.errors.push(e);
                None
            }
        },
        None => {
            r.errors.push("missing `experiment`".into());
            None
        }
    };
    let seed = match doc.get("seed") {
        None => {
            r.errors.push("missing `seed`".into());
            None
        }
        Some(Value::Integer(v)) => Some(*v as u64),
        Some(_) => {
            r.errors.push("`seed` must be an integer".into());
            None
        }
    };
    let times = r.floats("t");
    let xs = r.floats("xs");
    let xis = r.floats("xis");
    let samples = r.count("samples");
    let pool_size = r.count("pool_size").unwrap_or(100_000) as usize;
    let iterations = r.count("iterations").unwrap_or(60) as usize;
    let sizes = r.counts("sizes");
    let weights = r.floats("weights");
    let epsilon = r.float("epsilon").unwrap_or(0.5);
    let gamma = r.float("gamma").unwrap_or(0.75);
    let delta = r.float("delta");
    let adm_eps = r.float("admissibility_epsilon");
    let workers = r.count("workers").unwrap_or(1) as usize;
    let chunk_size = r.count("chunk_size").unwrap_or(10_000) as usize;
    let output = r.string("output").map(PathBuf::from);
    let pool_output = r.string("pool_output").map(PathBuf::from);
    if let Some(f) = r.string("format") {
        if f != "csv" {
            r.errors.push(format!("unsupported format `{f}` (only `csv`)"));
        }
    }

    if let Some(ts) = &times {
        if ts.is_empty() || ts.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            r.errors.push("`t` must be non-negative and finite".into());
        }
    }
    if let Some(xs) = &xs {
        if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
            r.errors.push("`xs` must be a non-empty list of finite numbers".into());
        }
    }
    if chunk_size == 0 {
        r.errors.push("`chunk_size` must be positive".into());
    }
    if pool_size == 0 {
        r.errors.push("`pool_size` must be positive".into());
    }

    let need = |present: bool, key: &str, errors: &mut Vec<String>| {
        if !present {
            if let Some(k) = experiment {
                errors.push(format!("experiment `{}` requires `{key}`", k.tag()));
            }
        }
    };
    let positive_xs = xs.as_ref().is_some_and(|v| v.iter().all(|&x| x > 0.0));
    match experiment {
        Some(ExperimentKind::Tail) => {
            need(times.is_some(), "t", &mut errors);
            need(xs.is_some(), "xs", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
            if xs.is_some() && !positive_xs {
                errors.push("tail thresholds must be positive".into());
            }
            if samples.is_some_and(|n| n < crate::deviations::MIN_TAIL_SAMPLES) {
                errors.push(format!("tail needs samples >= {}", crate::deviations::MIN_TAIL_SAMPLES));
            }
        }
        Some(ExperimentKind::CdfH) => {
            need(times.is_some(), "t", &mut errors);
            need(xs.is_some(), "xs", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
        }
        Some(ExperimentKind::CfV) => {
            need(times.is_some(), "t", &mut errors);
            need(xis.is_some(), "xis", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
        }
        Some(ExperimentKind::FixedPoint) => {}
        Some(ExperimentKind::Bounds) => {
            need(xs.is_some(), "xs", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
            need(weights.is_some() || sizes.is_some(), "weights or sizes", &mut errors);
            if xs.is_some() && !positive_xs {
                errors.push("bounds thresholds must be positive".into());
            }
            if !(epsilon > 0.0 && epsilon < 1.0) {
                errors.push(format!("epsilon = {epsilon} must lie in (0, 1)"));
            }
            if !(gamma > 0.0) {
                errors.push(format!("gamma = {gamma} must be positive"));
            }
            if let Some(w) = &weights {
                if w.is_empty() || w.iter().any(|&b| !(b >= 0.0)) || w.iter().all(|&b| b == 0.0) {
                    errors.push("`weights` must be non-negative and not all zero".into());
                }
            }
        }
        Some(ExperimentKind::Baseline) => {
            need(sizes.is_some(), "sizes", &mut errors);
            need(xs.is_some(), "xs", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
            if xs.is_some() && !positive_xs {
                errors.push("baseline thresholds must be positive".into());
            }
        }
        Some(ExperimentKind::OdeResidual) => {
            need(times.is_some(), "t", &mut errors);
            need(xs.is_some(), "xs", &mut errors);
            need(delta.is_some(), "delta", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
            if let Some(d) = delta {
                if !(d > 0.0 && d <= 0.1) {
                    errors.push(format!("delta = {d} must lie in (0, 0.1]"));
                }
            }
            if xs.as_ref().is_some_and(|v| v.contains(&0.0)) {
                errors.push("ode-residual thresholds must be non-zero".into());
            }
        }
        Some(ExperimentKind::Martingale) => {
            need(sizes.is_some(), "sizes", &mut errors);
            need(samples.is_some(), "samples", &mut errors);
        }
        None => {}
    }
    let alpha = law.as_ref().map(LawSpec::alpha).unwrap_or(1.0);
    let admissibility_epsilon = adm_eps.unwrap_or_else(|| (alpha / 2.0).min(0.25));
    if !(admissibility_epsilon > 0.0 && admissibility_epsilon < alpha) {
        errors.push(format!(
            "admissibility_epsilon = {admissibility_epsilon} must lie in (0, alpha)"
        ));
    }

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(ExperimentConfig {
        experiment: experiment.unwrap(),
        kernel: kernel.unwrap(),
        initial: law.unwrap(),
        seed: seed.unwrap(),
        times: times.unwrap_or_default(),
        xs: xs.unwrap_or_default(),
        xis: xis.unwrap_or_default(),
        samples: samples.unwrap_or(0),
        pool_size,
        iterations,
        sizes: sizes.unwrap_or_default(),
        weights,
        epsilon,
        gamma,
        delta: delta.unwrap_or(0.01),
        admissibility_epsilon,
        workers: workers.max(1),
        chunk_size,
        output,
        pool_output,
        document: doc,
    })
}
