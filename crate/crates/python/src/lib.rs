//! Python bindings: `import pykacsim`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kacsim::config::parse_config_with;
use kacsim::deviations::{estimate_tail_par, iid_baseline_par, lemma_bounds_par};
use kacsim::kernels::{classify_regime, Atom, DEFAULT_ETA, DEFAULT_REGIME_TOL};
use kacsim::limits::{self, ZPool};
use kacsim::processes::{sample_yule, PathSampler};
use kacsim::weights::mean_weight_norm;
use kacsim::{experiment, rng, CollisionKernel, Error, InitialLaw as CoreLaw, Parallel};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Collision kernel `(L, R)`.
#[pyclass(name = "Kernel", module = "pykacsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Kernel {
    inner: CollisionKernel,
}

#[pymethods]
impl Kernel {
    #[staticmethod]
    fn kac() -> Self {
        Self { inner: CollisionKernel::kac() }
    }

    #[staticmethod]
    fn deterministic(left: f64, right: f64) -> PyResult<Self> {
        Ok(Self { inner: CollisionKernel::deterministic(left, right).map_err(py_err)? })
    }

    #[staticmethod]
    fn steady_state(alpha: f64) -> PyResult<Self> {
        Ok(Self { inner: CollisionKernel::steady_state(alpha).map_err(py_err)? })
    }

    /// `atoms` is a list of `(left, right, prob)`.
    #[staticmethod]
    fn mixture(atoms: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(left, right, prob)| Atom { left, right, prob })
            .collect();
        Ok(Self { inner: CollisionKernel::mixture(atoms).map_err(py_err)? })
    }

    /// Closed-form `Q(s)`, or `None` when only Monte Carlo is available.
    fn q(&self, s: f64) -> Option<f64> {
        self.inner.exact_q(s)
    }

    fn is_nondegenerate(&self) -> bool {
        self.inner.is_nondegenerate()
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut r = rng::stream(seed, "py-kernel", 0);
        (0..n).map(|_| self.inner.sample(&mut r)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?})", self.inner.kind())
    }
}

/// Heavy-tailed initial law.
#[pyclass(name = "InitialLaw", module = "pykacsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct InitialLaw {
    inner: CoreLaw,
}

#[pymethods]
impl InitialLaw {
    #[staticmethod]
    #[pyo3(signature = (alpha, xmin = 1.0))]
    fn symmetric_pareto(alpha: f64, xmin: f64) -> PyResult<Self> {
        Ok(Self { inner: CoreLaw::symmetric_pareto(alpha, xmin).map_err(py_err)? })
    }

    #[staticmethod]
    fn asymmetric_pareto(alpha: f64, c_plus: f64, c_minus: f64) -> PyResult<Self> {
        Ok(Self { inner: CoreLaw::asymmetric_pareto(alpha, c_plus, c_minus).map_err(py_err)? })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn c0(&self) -> f64 {
        self.inner.c0()
    }

    #[getter]
    fn gamma0(&self) -> f64 {
        self.inner.gamma0()
    }

    /// `P{|X| > x}`.
    fn tail_prob(&self, x: f64) -> f64 {
        self.inner.tail_prob(x)
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "py-law", 0);
        (0..n).map(|_| self.inner.sample(&mut r)).collect()
    }
}

/// Regime of `kernel` at `alpha` as a dict.
#[pyfunction]
#[pyo3(signature = (kernel, alpha, seed = 0))]
fn regime<'py>(py: Python<'py>, kernel: &Kernel, alpha: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let r = classify_regime(&kernel.inner, alpha, DEFAULT_ETA, DEFAULT_REGIME_TOL, &mut rng::stream(seed, "py-regime", 0))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("alpha", r.alpha)?;
    d.set_item("s_alpha", r.s_alpha)?;
    d.set_item("s_2alpha", r.s_2alpha)?;
    d.set_item("mu_alpha", r.mu_alpha)?;
    d.set_item("mu_2alpha", r.mu_2alpha)?;
    d.set_item("case", r.case.id())?;
    Ok(d)
}

/// `m_n = Γ(n+S)/(Γ(n)Γ(S+1))`.
#[pyfunction]
fn weight_norm(s_alpha: f64, n: usize) -> PyResult<f64> {
    Ok(mean_weight_norm(s_alpha, n).map_err(py_err)?.m)
}

#[pyfunction]
fn yule(t: f64, n: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, "py-yule", 0);
    (0..n).map(|_| sample_yule(t, &mut r)).collect()
}

/// `n` draws of `(ν_t, V_t, H_t)`.
#[pyfunction]
fn paths(kernel: &Kernel, law: &InitialLaw, t: f64, n: usize, seed: u64) -> Vec<(usize, f64, f64)> {
    let mut r = rng::stream(seed, "py-paths", 0);
    let mut s = PathSampler::new(&kernel.inner, &law.inner, law.inner.alpha());
    (0..n)
        .map(|_| {
            let p = s.sample(t, &mut r);
            (p.n, p.v, p.h)
        })
        .collect()
}

/// Fixed-point pool for `Z_∞(α)` started from all ones.
#[pyfunction]
#[pyo3(signature = (kernel, alpha, size = 100_000, iterations = 60, seed = 0))]
fn zpool(kernel: &Kernel, alpha: f64, size: usize, iterations: usize, seed: u64) -> PyResult<Vec<f64>> {
    let s = match kernel.inner.exact_q(alpha) {
        Some(s) => s,
        None => kacsim::kernels::q_value(&kernel.inner, alpha, &mut rng::stream(seed, "py-q", 0)).map_err(py_err)?,
    };
    let pool = limits::zpool_iterate(&ZPool::ones(size, alpha, s), &kernel.inner, &mut rng::stream(seed, "py-zpool", 0), iterations)
        .map_err(py_err)?;
    Ok(pool.samples)
}

/// `(λ, η)` of the stable factor.
#[pyfunction]
#[pyo3(signature = (c_plus, c_minus, alpha, gamma0 = 0.0))]
fn stable_params(c_plus: f64, c_minus: f64, alpha: f64, gamma0: f64) -> PyResult<(f64, f64)> {
    let p = limits::stable_params(c_plus, c_minus, alpha, gamma0).map_err(py_err)?;
    Ok((p.lambda, p.eta_skew))
}

/// `E[exp(iξV_∞)]` as `(re, im)` for the given pool.
#[pyfunction]
fn cf_v_infinity(xi: f64, pool: Vec<f64>, law: &InitialLaw) -> PyResult<(f64, f64)> {
    let l = &law.inner;
    let p = limits::stable_params(l.c0_plus(), l.c0_minus(), l.alpha(), l.gamma0()).map_err(py_err)?;
    let c = limits::cf_v_infinity(xi, &ZPool::from_samples(pool, l.alpha(), 0.0), &p);
    Ok((c.re, c.im))
}

#[pyfunction]
fn cdf_h_infinity(x: f64, pool: Vec<f64>, c0: f64, alpha: f64) -> f64 {
    limits::cdf_h_infinity(x, &ZPool::from_samples(pool, alpha, 0.0), c0, alpha)
}

/// Tail estimates as a list of dicts with the CSV column names.
#[pyfunction]
#[pyo3(signature = (kernel, law, t, xs, n, seed, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn estimate_tail<'py>(
    py: Python<'py>,
    kernel: &Kernel,
    law: &InitialLaw,
    t: f64,
    xs: Vec<f64>,
    n: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let a = law.inner.alpha();
    let s = kernel
        .inner
        .exact_q(a)
        .ok_or_else(|| PyValueError::new_err("kernel has no closed-form Q; use run_config"))?;
    let par = Parallel::new(seed).with_workers(workers);
    let est = py
        .detach(|| estimate_tail_par(&kernel.inner, &law.inner, t, s / a, &xs, n, &par))
        .map_err(py_err)?;
    est.into_iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("t", e.t)?;
            d.set_item("x", e.x)?;
            d.set_item("N", e.n)?;
            d.set_item("hits_V", e.hits_v)?;
            d.set_item("hits_H", e.hits_h)?;
            d.set_item("p_V", e.p_v)?;
            d.set_item("se_V", e.se_v)?;
            d.set_item("p_H", e.p_h)?;
            d.set_item("se_H", e.se_h)?;
            d.set_item("ratio_paper", e.ratio_paper)?;
            d.set_item("ratio_max", e.ratio_max)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (b, law, x, n, seed, epsilon = 0.5, gamma = 0.75))]
#[allow(clippy::too_many_arguments)]
fn lemma_bounds<'py>(
    py: Python<'py>,
    b: Vec<f64>,
    law: &InitialLaw,
    x: f64,
    n: u64,
    seed: u64,
    epsilon: f64,
    gamma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let par = Parallel::new(seed);
    let r = py
        .detach(|| lemma_bounds_par(&b, &law.inner, x, epsilon, gamma, n, &par))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("lower", r.lower)?;
    d.set_item("upper", r.upper)?;
    d.set_item("max_lower", r.max_lower)?;
    d.set_item("max_upper", r.max_upper)?;
    d.set_item("mc", r.mc_estimate)?;
    d.set_item("mc_se", r.mc_se)?;
    d.set_item("mc_max", r.mc_max)?;
    d.set_item("mc_max_se", r.mc_max_se)?;
    Ok(d)
}

/// `(ratio_sum, ratio_max, sum_over_max)` for `n` i.i.d. copies.
#[pyfunction]
fn iid_baseline(law: &InitialLaw, n: usize, x: f64, samples: u64, seed: u64) -> PyResult<(f64, f64, f64)> {
    let r = iid_baseline_par(&law.inner, n, x, samples, &Parallel::new(seed)).map_err(py_err)?;
    Ok((r.ratio_sum, r.ratio_max, r.sum_over_max))
}

/// Run a TOML config; returns `(csv, warnings)`.
#[pyfunction]
#[pyo3(signature = (text, overrides = Vec::new()))]
fn run_config(py: Python<'_>, text: &str, overrides: Vec<String>) -> PyResult<(String, Vec<String>)> {
    let config = parse_config_with(text, &overrides).map_err(py_err)?;
    let report = py.detach(|| experiment::run(&config)).map_err(py_err)?;
    Ok((report.csv(), report.warnings.iter().map(ToString::to_string).collect()))
}

#[pymodule]
fn pykacsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<InitialLaw>()?;
    m.add_function(wrap_pyfunction!(regime, m)?)?;
    m.add_function(wrap_pyfunction!(weight_norm, m)?)?;
    m.add_function(wrap_pyfunction!(yule, m)?)?;
    m.add_function(wrap_pyfunction!(paths, m)?)?;
    m.add_function(wrap_pyfunction!(zpool, m)?)?;
    m.add_function(wrap_pyfunction!(stable_params, m)?)?;
    m.add_function(wrap_pyfunction!(cf_v_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(cdf_h_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tail, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(iid_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
