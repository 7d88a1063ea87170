//! Config-driven experiments producing CSV tables.

use std::fmt::{self, Write as _};

use num_complex::Complex64;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::deviations::{
    admissible_point, estimate_tail_par, iid_baseline_par, lemma_bounds_par, max_ode_residual_par, Admissibility,
};
use crate::initial_data::InitialLaw;
use crate::kernels::{classify_regime, q_value, CollisionKernel, Regime, DEFAULT_ETA, DEFAULT_REGIME_TOL};
use crate::limits::{cdf_h_infinity, cf_v_infinity, stable_params, zpool_iterate, ZPool};
use crate::processes::PathSampler;
use crate::rng::Parallel;
use crate::stats::{binomial_se, ks_one_sample, Ecdf, Moments};
use crate::weights::{tilde_m, WeightArray};
use crate::Result;

pub const TAIL_COLUMNS: [&str; 11] = [
    "t", "x", "N", "hits_V", "hits_H", "p_V", "se_V", "p_H", "se_H", "ratio_paper", "ratio_max",
];
pub const BOUNDS_COLUMNS: [&str; 10] = [
    "n", "x", "epsilon", "gamma", "lower", "upper", "max_lower", "max_upper", "mc", "mc_se",
];
pub const CDF_H_COLUMNS: [&str; 7] = ["t", "x", "N", "cdf_H", "se", "cdf_limit", "ks"];
pub const CF_V_COLUMNS: [&str; 9] = ["t", "xi", "N", "re", "im", "se", "re_limit", "im_limit", "abs_err"];
pub const FIXED_POINT_COLUMNS: [&str; 5] = ["iteration", "pool_size", "mean", "se", "variance"];
pub const BASELINE_COLUMNS: [&str; 12] = [
    "n", "x", "N", "hits_sum", "hits_max", "p_sum", "se_sum", "p_max", "se_max", "ratio_sum", "ratio_max",
    "sum_over_max",
];
pub const ODE_COLUMNS: [&str; 9] = ["t", "x", "delta", "N", "cdf_t", "cdf_t_delta", "gain", "residual", "se"];
pub const MARTINGALE_COLUMNS: [&str; 4] = ["n", "N", "mean", "se"];

pub fn columns(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Tail => &TAIL_COLUMNS,
        ExperimentKind::CdfH => &CDF_H_COLUMNS,
        ExperimentKind::CfV => &CF_V_COLUMNS,
        ExperimentKind::FixedPoint => &FIXED_POINT_COLUMNS,
        ExperimentKind::Bounds => &BOUNDS_COLUMNS,
        ExperimentKind::Baseline => &BASELINE_COLUMNS,
        ExperimentKind::OdeResidual => &ODE_COLUMNS,
        ExperimentKind::Martingale => &MARTINGALE_COLUMNS,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

/// One output row; columns follow [`columns`] for the experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub experiment: ExperimentKind,
    pub cells: Vec<Cell>,
}

impl ResultRecord {
    pub fn get(&self, column: &str) -> Option<Cell> {
        columns(self.experiment)
            .iter()
            .position(|c| *c == column)
            .map(|i| self.cells[i])
    }

    pub fn real(&self, column: &str) -> Option<f64> {
        self.get(column).map(|c| match c {
            Cell::Int(v) => v as f64,
            Cell::Real(v) => v,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    Admissibility(String),
    LowPrecision(String),
    Regime(String),
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Admissibility(m) => write!(f, "admissibility: {m}"),
            Warning::LowPrecision(m) => write!(f, "low precision: {m}"),
            Warning::Regime(m) => write!(f, "regime: {m}"),
        }
    }
}

/// Spectral quantities of the run.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeInfo {
    pub alpha: f64,
    pub s_alpha: f64,
    pub mu_alpha: f64,
    pub s_2alpha: Option<f64>,
    pub case_id: Option<&'static str>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub records: Vec<ResultRecord>,
    pub regime: RegimeInfo,
    pub warnings: Vec<Warning>,
    pub pool: Option<ZPool>,
}

impl RunReport {
    pub fn header(&self) -> &'static [&'static str] {
        columns(self.experiment)
    }

    pub fn csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.records {
            let row: Vec<String> = r.cells.iter().map(Cell::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn admissibility_warned(&self) -> bool {
        self.warnings.iter().any(|w| matches!(w, Warning::Admissibility(_)))
    }

    /// Regime metadata and the resolved config, as a TOML document.
    pub fn metadata(&self, config: &ExperimentConfig) -> String {
        let mut out = String::new();
        let r = &self.regime;
        let _ = writeln!(out, "experiment = \"{}\"", self.experiment.tag());
        let _ = writeln!(out, "\n[regime]\nalpha = {:?}\ns_alpha = {:?}\nmu_alpha = {:?}", r.alpha, r.s_alpha, r.mu_alpha);
        if let Some(s2) = r.s_2alpha {
            let _ = writeln!(out, "s_2alpha = {s2:?}");
        }
        if let Some(id) = r.case_id {
            let _ = writeln!(out, "case = \"{id}\"");
        }
        let _ = writeln!(out, "\n[config]");
        out.push_str(&toml::to_string(&config.document).unwrap_or_default());
        out
    }
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    kernel: CollisionKernel,
    law: InitialLaw,
    par: Parallel,
    regime: Option<Regime>,
    info: RegimeInfo,
    warnings: Vec<Warning>,
}

fn record<I: IntoIterator<Item = Cell>>(experiment: ExperimentKind, cells: I) -> ResultRecord {
    ResultRecord {
        experiment,
        cells: cells.into_iter().collect(),
    }
}

macro_rules! row {
    ($kind:expr; $($v:expr),* $(,)?) => {
        record($kind, [$(Cell::from($v)),*])
    };
}

/// Run the configured experiment. The output is a pure function of the
/// config (worker count included).
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let kernel = config.kernel.build()?;
    let law = config.initial.build()?;
    let alpha = law.alpha();
    let par = Parallel::new(config.seed)
        .with_workers(config.workers)
        .with_chunk_size(config.chunk_size);
    let mut warnings = Vec::new();
    let mut spectral_rng = par.stream("spectral");
    let regime = match classify_regime(&kernel, alpha, DEFAULT_ETA, DEFAULT_REGIME_TOL, &mut spectral_rng) {
        Ok(r) => Some(r),
        Err(e) => {
            warnings.push(Warning::Regime(e.to_string()));
            None
        }
    };
    let s_alpha = match &regime {
        Some(r) => r.s_alpha,
        None => q_value(&kernel, alpha, &mut par.stream("spectral-alpha"))?,
    };
    let info = RegimeInfo {
        alpha,
        s_alpha,
        mu_alpha: s_alpha / alpha,
        s_2alpha: regime.as_ref().map(|r| r.s_2alpha),
        case_id: regime.as_ref().map(|r| r.case.id()),
    };
    let mut cx = Context {
        config,
        kernel,
        law,
        par,
        regime,
        info,
        warnings,
    };
    let mut pool = None;
    let records = match config.experiment {
        ExperimentKind::Tail => run_tail(&mut cx)?,
        ExperimentKind::CdfH => run_cdf_h(&mut cx)?,
        ExperimentKind::CfV => run_cf_v(&mut cx)?,
        ExperimentKind::FixedPoint => {
            let (rows, p) = run_fixed_point(&cx)?;
            pool = Some(p);
            rows
        }
        ExperimentKind::Bounds => run_bounds(&cx)?,
        ExperimentKind::Baseline => run_baseline(&cx)?,
        ExperimentKind::OdeResidual => run_ode(&cx)?,
        ExperimentKind::Martingale => run_martingale(&cx)?,
    };
    Ok(RunReport {
        experiment: config.experiment,
        records,
        regime: cx.info,
        warnings: cx.warnings,
        pool,
    })
}

fn run_tail(cx: &mut Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let mut rows = Vec::new();
    for (i, &t) in c.times.iter().enumerate() {
        if let Some(regime) = &cx.regime {
            for &x in &c.xs {
                if admissible_point(regime, c.admissibility_epsilon, t, x)? == Admissibility::Inadmissible {
                    cx.warnings.push(Warning::Admissibility(format!(
                        "x = {x} at t = {t}: x^(alpha-eps) <= h(t) = {} in regime {}",
                        regime.h(t),
                        regime.case
                    )));
                }
            }
        }
        let est = estimate_tail_par(&cx.kernel, &cx.law, t, cx.info.mu_alpha, &c.xs, c.samples, &cx.par.fork(i as u64))?;
        for e in est {
            if e.low_precision {
                cx.warnings.push(Warning::LowPrecision(format!(
                    "x = {} at t = {t}: expected hits N c0 / x^alpha < 20",
                    e.x
                )));
            }
            rows.push(row![ExperimentKind::Tail; e.t, e.x, e.n, e.hits_v, e.hits_h, e.p_v, e.se_v, e.p_h, e.se_h, e.ratio_paper, e.ratio_max]);
        }
    }
    Ok(rows)
}

fn fixed_point_pool(cx: &Context) -> Result<ZPool> {
    let c = cx.config;
    let start = ZPool::ones(c.pool_size, cx.info.alpha, cx.info.s_alpha);
    zpool_iterate(&start, &cx.kernel, &mut cx.par.stream("zpool"), c.iterations)
}

/// Rescaled `(V, H)` draws at time `t`.
fn rescaled_draws(cx: &Context, t: f64, tag: u64) -> Vec<(f64, f64)> {
    let scale = (-cx.info.mu_alpha * t).exp();
    let (kernel, law, alpha) = (&cx.kernel, &cx.law, cx.info.alpha);
    cx.par
        .fork(tag)
        .map_chunks("paths", cx.config.samples as usize, |rng, len| {
            let mut s = PathSampler::new(kernel, law, alpha);
            (0..len)
                .map(|_| {
                    let p = s.sample(t, rng);
                    (scale * p.v, scale * p.h)
                })
                .collect::<Vec<_>>()
        })
        .concat()
}

fn run_cdf_h(cx: &mut Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let pool = fixed_point_pool(cx)?;
    let (c0, a) = (cx.law.c0(), cx.info.alpha);
    let mut rows = Vec::new();
    for (i, &t) in c.times.iter().enumerate() {
        let hs: Vec<f64> = rescaled_draws(cx, t, i as u64).into_iter().map(|d| d.1).collect();
        let ks = ks_one_sample(&hs, |x| cdf_h_infinity(x, &pool, c0, a));
        let ecdf = Ecdf::new(hs);
        for &x in &c.xs {
            let p = ecdf.eval(x);
            rows.push(row![ExperimentKind::CdfH; t, x, c.samples, p, binomial_se(p, c.samples), cdf_h_infinity(x, &pool, c0, a), ks]);
        }
    }
    Ok(rows)
}

fn run_cf_v(cx: &mut Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let pool = fixed_point_pool(cx)?;
    let params = stable_params(cx.law.c0_plus(), cx.law.c0_minus(), cx.info.alpha, cx.law.gamma0())?;
    let mut rows = Vec::new();
    for (i, &t) in c.times.iter().enumerate() {
        let vs: Vec<f64> = rescaled_draws(cx, t, i as u64).into_iter().map(|d| d.0).collect();
        for &xi in &c.xis {
            let (mut re, mut im) = (Moments::new(), Moments::new());
            for &v in &vs {
                re.push((xi * v).cos());
                im.push((xi * v).sin());
            }
            let emp = Complex64::new(re.mean, im.mean);
            let lim = cf_v_infinity(xi, &pool, &params);
            let se = (re.std_error().powi(2) + im.std_error().powi(2)).sqrt();
            rows.push(row![ExperimentKind::CfV; t, xi, c.samples, emp.re, emp.im, se, lim.re, lim.im, (emp - lim).norm()]);
        }
    }
    Ok(rows)
}

fn run_fixed_point(cx: &Context) -> Result<(Vec<ResultRecord>, ZPool)> {
    let c = cx.config;
    let mut pool = ZPool::ones(c.pool_size, cx.info.alpha, cx.info.s_alpha);
    let mut rng = cx.par.stream("zpool");
    let mut rows = vec![row![ExperimentKind::FixedPoint; 0usize, pool.len(), pool.mean(), pool.std_error(), pool.variance()]];
    for it in 1..=c.iterations {
        pool = zpool_iterate(&pool, &cx.kernel, &mut rng, 1)?;
        rows.push(row![ExperimentKind::FixedPoint; it, pool.len(), pool.mean(), pool.std_error(), pool.variance()]);
    }
    Ok((rows, pool))
}

fn bound_weights(cx: &Context) -> Vec<Vec<f64>> {
    let c = cx.config;
    match &c.weights {
        Some(w) => vec![w.clone()],
        None => c
            .sizes
            .iter()
            .map(|&n| vec![(n as f64).powf(-1.0 / cx.info.alpha); n])
            .collect(),
    }
}

fn run_bounds(cx: &Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let mut rows = Vec::new();
    let mut k = 0u64;
    for b in bound_weights(cx) {
        for &x in &c.xs {
            let r = lemma_bounds_par(&b, &cx.law, x, c.epsilon, c.gamma, c.samples, &cx.par.fork(k))?;
            k += 1;
            rows.push(row![ExperimentKind::Bounds; r.n, r.x, r.epsilon, r.gamma, r.lower, r.upper, r.max_lower, r.max_upper, r.mc_estimate, r.mc_se]);
        }
    }
    Ok(rows)
}

fn run_baseline(cx: &Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let mut rows = Vec::new();
    let mut k = 0u64;
    for &n in &c.sizes {
        for &x in &c.xs {
            let r = iid_baseline_par(&cx.law, n, x, c.samples, &cx.par.fork(k))?;
            k += 1;
            rows.push(row![ExperimentKind::Baseline; r.n, r.x, r.samples, r.hits_sum, r.hits_max, r.p_sum, r.se_sum, r.p_max, r.se_max, r.ratio_sum, r.ratio_max, r.sum_over_max]);
        }
    }
    Ok(rows)
}

fn run_ode(cx: &Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let mut rows = Vec::new();
    let mut k = 0u64;
    for &t in &c.times {
        for &x in &c.xs {
            let r = max_ode_residual_par(&cx.kernel, &cx.law, t, x, c.delta, c.samples as usize, &cx.par.fork(k))?;
            k += 1;
            rows.push(row![ExperimentKind::OdeResidual; t, x, c.delta, c.samples, r.cdf_t, r.cdf_t_delta, r.gain, r.residual, r.se]);
        }
    }
    Ok(rows)
}

fn run_martingale(cx: &Context) -> Result<Vec<ResultRecord>> {
    let c = cx.config;
    let (kernel, alpha, s) = (&cx.kernel, cx.info.alpha, cx.info.s_alpha);
    let mut rows = Vec::new();
    for (i, &n) in c.sizes.iter().enumerate() {
        let chunks = cx.par.fork(i as u64).map_chunks("martingale", c.samples as usize, |rng, len| {
            let mut w = WeightArray::new(&[alpha]);
            let mut m = Moments::new();
            for _ in 0..len {
                w.reset();
                w.grow_to(kernel, n, rng);
                m.push(tilde_m(&w, alpha, s)?);
            }
            Ok::<_, crate::Error>(m)
        });
        let mut m = Moments::new();
        for chunk in chunks {
            m = m.merge(chunk?);
        }
        rows.push(row![ExperimentKind::Martingale; n, c.samples, m.mean, m.std_error()]);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const BASE: &str = r#"
seed = 7
[kernel]
kind = "kac"
[initial]
kind = "symmetric-pareto"
alpha = 1.5
"#;

    fn cfg(extra: &str) -> ExperimentConfig {
        parse_config(&format!("{extra}\n{BASE}")).unwrap()
    }

    #[test]
    fn tail_csv_header_and_shape() {
        let c = cfg("experiment = \"tail\"\nt = [0, 1]\nxs = [2, 10]\nsamples = 10000");
        let r = run(&c).unwrap();
        let csv = r.csv();
        assert!(csv.starts_with("t,x,N,hits_V,hits_H,p_V,se_V,p_H,se_H,ratio_paper,ratio_max\n"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(r.regime.case_id, Some("unrestricted"));
        assert!(!r.admissibility_warned());
    }

    #[test]
    fn tail_time_zero_ratio_near_one() {
        let c = cfg("experiment = \"tail\"\nt = 0\nxs = [10]\nsamples = 400000");
        let r = run(&c).unwrap();
        let rec = &r.records[0];
        let ratio = rec.real("ratio_paper").unwrap();
        let se = rec.real("se_V").unwrap() * 10f64.powf(1.5);
        assert!((ratio - 1.0).abs() <= 4.0 * se, "{ratio} ± {se}");
    }

    #[test]
    fn deterministic_csv_across_workers() {
        let c = cfg("experiment = \"tail\"\nt = 1\nxs = [3]\nsamples = 30000\nchunk_size = 4000");
        let mut c4 = c.clone();
        c4.workers = 4;
        assert_eq!(run(&c).unwrap().csv(), run(&c4).unwrap().csv());
        assert_eq!(run(&c).unwrap().csv(), run(&c).unwrap().csv());
    }

    #[test]
    fn martingale_mean_one() {
        let c = parse_config(
            "experiment = \"martingale\"\nsizes = [64, 1024]\nsamples = 5000\nseed = 3\n[kernel]\nkind = \"kac\"\n[initial]\nkind = \"symmetric-pareto\"\nalpha = 1\n",
        )
        .unwrap();
        let r = run(&c).unwrap();
        for rec in &r.records {
            let (m, se) = (rec.real("mean").unwrap(), rec.real("se").unwrap());
            assert!((m - 1.0).abs() <= 4.0 * se, "{rec:?}");
        }
    }

    #[test]
    fn restricted_regime_warns() {
        // (L, R) = (1, 3), α = 1: Q(s) = 3^s, μ(2) = 4.5 > μ(1) = 3, h(t) = e^{3t}
        let c = parse_config(
            "experiment = \"tail\"\nt = 1\nxs = [1.5]\nsamples = 10000\nseed = 3\n[kernel]\nkind = \"deterministic\"\nleft = 1\nright = 3\n[initial]\nkind = \"symmetric-pareto\"\nalpha = 1\n",
        )
        .unwrap();
        let r = run(&c).unwrap();
        assert_eq!(r.regime.case_id, Some("mu(2a)>mu(a)"));
        assert!(r.admissibility_warned());
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn other_experiments_run() {
        let cases = [
            "experiment = \"cdf-H\"\nt = 1\nxs = [0.5, 2]\nsamples = 2000\npool_size = 1000\niterations = 5",
            "experiment = \"cf-V\"\nt = 1\nxis = [0.5, -0.5]\nsamples = 2000\npool_size = 1000\niterations = 5",
            "experiment = \"fixed-point\"\npool_size = 1000\niterations = 3",
            "experiment = \"bounds\"\nsizes = [1, 4]\nxs = [10]\nsamples = 2000",
            "experiment = \"baseline\"\nsizes = [10]\nxs = [2]\nsamples = 2000",
            "experiment = \"ode-residual\"\nt = 0.5\nxs = [2]\ndelta = 0.05\nsamples = 2000",
        ];
        for case in cases {
            let c = cfg(case);
            let r = run(&c).unwrap();
            assert!(!r.records.is_empty(), "{case}");
            let header = r.header().len();
            assert!(r.records.iter().all(|rec| rec.cells.len() == header), "{case}");
        }
        let r = run(&cfg("experiment = \"bounds\"\nsizes = [1]\nxs = [10]\nsamples = 1000")).unwrap();
        assert!(r.csv().starts_with("n,x,epsilon,gamma,lower,upper,max_lower,max_upper,mc,mc_se\n"));
        let r = run(&cfg("experiment = \"fixed-point\"\npool_size = 100\niterations = 2")).unwrap();
        assert_eq!(r.pool.unwrap().len(), 100);
    }

    #[test]
    fn metadata_echoes_config() {
        let c = cfg("experiment = \"tail\"\nt = 1\nxs = [3]\nsamples = 10000");
        let r = run(&c).unwrap();
        let meta = r.metadata(&c);
        let doc: toml::Table = meta.parse().unwrap();
        assert_eq!(doc["config"]["seed"].as_integer(), Some(7));
        assert!(doc["regime"]["s_alpha"].as_float().is_some());
    }
}
