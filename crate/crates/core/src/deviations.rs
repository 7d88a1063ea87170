//! Tail probabilities of the rescaled solution and max processes, finite-n
//! sandwich bounds for weighted sums, admissible thresholds, the i.i.d.
//! baseline and the kinetic residual of the max process.

use rand::Rng;

use crate::initial_data::InitialLaw;
use crate::kernels::{q_value, CollisionKernel, Regime, RegimeCase};
use crate::processes::PathSampler;
use crate::rng::Parallel;
use crate::stats::{binomial_se, Ecdf, Moments};
use crate::{Error, Result};

/// Smallest path count accepted by [`estimate_tail`].
pub const MIN_TAIL_SAMPLES: u64 = 10_000;
/// Expected hit count below which an estimate is flagged.
pub const MIN_EXPECTED_HITS: f64 = 20.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TailEstimate {
    pub t: f64,
    pub x: f64,
    pub n: u64,
    pub hits_v: u64,
    pub hits_h: u64,
    pub p_v: f64,
    pub p_h: f64,
    pub se_v: f64,
    pub se_h: f64,
    /// `x^α p_V / c_0`.
    pub ratio_paper: f64,
    /// `p_V / p_H`.
    pub ratio_max: f64,
    /// `N c_0 / x^α < 20`.
    pub low_precision: bool,
}

/// Exceedance counts over a shared grid, mergeable across chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TailCounts {
    pub n: u64,
    pub hits_v: Vec<u64>,
    pub hits_h: Vec<u64>,
}

impl TailCounts {
    pub fn new(grid: usize) -> Self {
        Self {
            n: 0,
            hits_v: vec![0; grid],
            hits_h: vec![0; grid],
        }
    }

    pub fn merge(mut self, other: TailCounts) -> TailCounts {
        self.n += other.n;
        for (a, b) in self.hits_v.iter_mut().zip(other.hits_v) {
            *a += b;
        }
        for (a, b) in self.hits_h.iter_mut().zip(other.hits_h) {
            *a += b;
        }
        self
    }

    pub fn estimates(&self, t: f64, xs: &[f64], alpha: f64, c0: f64) -> Vec<TailEstimate> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let p_v = self.hits_v[i] as f64 / self.n as f64;
                let p_h = self.hits_h[i] as f64 / self.n as f64;
                TailEstimate {
                    t,
                    x,
                    n: self.n,
                    hits_v: self.hits_v[i],
                    hits_h: self.hits_h[i],
                    p_v,
                    p_h,
                    se_v: binomial_se(p_v, self.n),
                    se_h: binomial_se(p_h, self.n),
                    ratio_paper: x.powf(alpha) * p_v / c0,
                    ratio_max: p_v / p_h,
                    low_precision: self.n as f64 * c0 / x.powf(alpha) < MIN_EXPECTED_HITS,
                }
            })
            .collect()
    }
}

fn check_tail_inputs(xs: &[f64], n: u64) -> Result<()> {
    if n < MIN_TAIL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "tail estimation needs N >= {MIN_TAIL_SAMPLES}, got {n}"
        )));
    }
    if xs.is_empty() || xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("thresholds must be positive and finite".into()));
    }
    Ok(())
}

/// Count, over `n` paths, the exceedances of `e^{-μt}|V_t|` and `e^{-μt}H_t`
/// for every threshold in `xs` (the same paths serve every threshold).
pub fn tail_counts<R: Rng>(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    t: f64,
    mu_alpha: f64,
    xs: &[f64],
    n: usize,
    rng: &mut R,
) -> TailCounts {
    let alpha = law.alpha();
    let scale = (-mu_alpha * t).exp();
    let mut sampler = PathSampler::new(kernel, law, alpha);
    let mut counts = TailCounts::new(xs.len());
    counts.n = n as u64;
    for _ in 0..n {
        let p = sampler.sample(t, rng);
        let (v, h) = (scale * p.v.abs(), scale * p.h);
        for (i, &x) in xs.iter().enumerate() {
            counts.hits_v[i] += (v > x) as u64;
            counts.hits_h[i] += (h > x) as u64;
        }
    }
    counts
}

/// Single-stream tail estimate; `μ(α)` comes from the kernel's spectral
/// function.
pub fn estimate_tail<R: Rng>(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    t: f64,
    xs: &[f64],
    n: u64,
    rng: &mut R,
) -> Result<Vec<TailEstimate>> {
    check_tail_inputs(xs, n)?;
    let alpha = law.alpha();
    let mu = q_value(kernel, alpha, rng)? / alpha;
    let counts = tail_counts(kernel, law, t, mu, xs, n as usize, rng);
    Ok(counts.estimates(t, xs, alpha, law.c0()))
}

/// Chunked tail estimate with a given `μ(α)`; identical for any worker count.
pub fn estimate_tail_par(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    t: f64,
    mu_alpha: f64,
    xs: &[f64],
    n: u64,
    par: &Parallel,
) -> Result<Vec<TailEstimate>> {
    check_tail_inputs(xs, n)?;
    let counts = par
        .fold_chunks(
            "tail",
            n as usize,
            |rng, len| tail_counts(kernel, law, t, mu_alpha, xs, len, rng),
            TailCounts::merge,
        )
        .unwrap_or_else(|| TailCounts::new(xs.len()));
    Ok(counts.estimates(t, xs, law.alpha(), law.c0()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Admissibility {
    Admissible,
    Inadmissible,
    Unrestricted,
}

fn check_epsilon(regime: &Regime, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < regime.alpha) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, alpha = {}), got {epsilon}",
            regime.alpha
        )));
    }
    Ok(())
}

/// Decide whether `x_t^{α−ε}/h(t)` grows without bound, using the witness
/// grid `{T/8, T/4, T/2, T}`: the log-ratio must be strictly increasing on
/// the grid and positive at `T`.
pub fn admissible_schedule<F: Fn(f64) -> f64>(
    regime: &Regime,
    epsilon: f64,
    horizon: f64,
    x_t: F,
) -> Result<Admissibility> {
    check_epsilon(regime, epsilon)?;
    if regime.case == RegimeCase::Unrestricted {
        return Ok(Admissibility::Unrestricted);
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let log_ratio = |t: f64| (regime.alpha - epsilon) * x_t(t).ln() - regime.h(t).ln();
    let grid = [horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon];
    let values: Vec<f64> = grid.iter().map(|&t| log_ratio(t)).collect();
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    if increasing && values[3] > 0.0 && values.iter().all(|v| v.is_finite()) {
        Ok(Admissibility::Admissible)
    } else {
        Ok(Admissibility::Inadmissible)
    }
}

/// Single-point check for a fixed `(t, x)`: admissible iff
/// `x^{α−ε} > h(t)` in a restricted regime.
pub fn admissible_point(regime: &Regime, epsilon: f64, t: f64, x: f64) -> Result<Admissibility> {
    check_epsilon(regime, epsilon)?;
    if regime.case == RegimeCase::Unrestricted {
        return Ok(Admissibility::Unrestricted);
    }
    if x.powf(regime.alpha - epsilon) / regime.h(t) > 1.0 {
        Ok(Admissibility::Admissible)
    } else {
        Ok(Admissibility::Inadmissible)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IidBaseline {
    pub n: usize,
    pub x: f64,
    pub samples: u64,
    pub hits_sum: u64,
    pub hits_max: u64,
    pub p_sum: f64,
    pub se_sum: f64,
    pub p_max: f64,
    pub se_max: f64,
    /// `x^α p_sum / c_0`.
    pub ratio_sum: f64,
    /// `x^α p_max / c_0`.
    pub ratio_max: f64,
    /// `p_sum / p_max`.
    pub sum_over_max: f64,
    /// `x^α n P{|X_1| > n^{1/α} x} / c_0`, exact from the law.
    pub exact_single: f64,
}

/// `(hits of |Σ X_i| > y, hits of max |X_i| > y)` with `y = n^{1/α} x`.
fn iid_counts<R: Rng>(law: &InitialLaw, n: usize, x: f64, samples: usize, rng: &mut R) -> (u64, u64) {
    let y = (n as f64).powf(1.0 / law.alpha()) * x;
    let (mut hs, mut hm) = (0u64, 0u64);
    for _ in 0..samples {
        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        for _ in 0..n {
            let v = law.sample(rng);
            sum += v;
            max = max.max(v.abs());
        }
        hs += (sum.abs() > y) as u64;
        hm += (max > y) as u64;
    }
    (hs, hm)
}

fn iid_report(law: &InitialLaw, n: usize, x: f64, samples: u64, hs: u64, hm: u64) -> IidBaseline {
    let (a, c0) = (law.alpha(), law.c0());
    let p_sum = hs as f64 / samples as f64;
    let p_max = hm as f64 / samples as f64;
    let y = (n as f64).powf(1.0 / a) * x;
    IidBaseline {
        n,
        x,
        samples,
        hits_sum: hs,
        hits_max: hm,
        p_sum,
        se_sum: binomial_se(p_sum, samples),
        p_max,
        se_max: binomial_se(p_max, samples),
        ratio_sum: x.powf(a) * p_sum / c0,
        ratio_max: x.powf(a) * p_max / c0,
        sum_over_max: p_sum / p_max,
        exact_single: x.powf(a) * n as f64 * law.tail_prob(y) / c0,
    }
}

fn check_iid(law: &InitialLaw, n: usize, x: f64) -> Result<()> {
    if n == 0 || !(x > 0.0) {
        return Err(Error::InvalidArgument("baseline needs n >= 1 and x > 0".into()));
    }
    if law.alpha() == 1.0 && law.c0_plus() != law.c0_minus() {
        return Err(Error::InvalidLaw("alpha = 1 baseline needs c0+ = c0-".into()));
    }
    Ok(())
}

/// Tails of `n^{-1/α} Σ X_i` and `n^{-1/α} max |X_i|` from the same draws.
pub fn iid_baseline<R: Rng>(law: &InitialLaw, n: usize, x: f64, samples: u64, rng: &mut R) -> Result<IidBaseline> {
    check_iid(law, n, x)?;
    let (hs, hm) = iid_counts(law, n, x, samples as usize, rng);
    Ok(iid_report(law, n, x, samples, hs, hm))
}

pub fn iid_baseline_par(law: &InitialLaw, n: usize, x: f64, samples: u64, par: &Parallel) -> Result<IidBaseline> {
    check_iid(law, n, x)?;
    let (hs, hm) = par
        .fold_chunks(
            "baseline",
            samples as usize,
            |rng, len| iid_counts(law, n, x, len, rng),
            |a, b| (a.0 + b.0, a.1 + b.1),
        )
        .unwrap_or((0, 0));
    Ok(iid_report(law, n, x, samples, hs, hm))
}

/// Analytic sandwich for `x^α P{|Σ b_j X_j| > x}` and for the max of
/// `|b_j X_j|`, next to Monte Carlo estimates of both.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub n: usize,
    pub b: Vec<f64>,
    pub x: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
    pub max_lower: f64,
    pub max_upper: f64,
    /// Estimate of `P{|S_n| + b(n)|X_j| ≤ εx}`, minimised over `j`.
    pub delta: f64,
    /// Estimate of `x^α P{|S_n| > x}`.
    pub mc_estimate: f64,
    pub mc_se: f64,
    /// Estimate of `x^α P{max_j |b_j X_j| > x}`.
    pub mc_max: f64,
    pub mc_max_se: f64,
}

impl BoundsReport {
    pub fn sum_inside(&self, k: f64) -> bool {
        self.mc_estimate >= self.lower - k * self.mc_se && self.mc_estimate <= self.upper + k * self.mc_se
    }

    pub fn max_inside(&self, k: f64) -> bool {
        self.mc_max >= self.max_lower - k * self.mc_max_se
            && self.mc_max <= self.max_upper + k * self.mc_max_se
    }
}

/// Partial counts for [`lemma_bounds`]: sum hits, max hits, and per-index
/// counts of `|S_n| + b(n)|X_j| ≤ εx` on an independent batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundsCounts {
    pub n: u64,
    pub hits_sum: u64,
    pub hits_max: u64,
    pub delta: Vec<u64>,
}

impl BoundsCounts {
    pub fn merge(mut self, other: BoundsCounts) -> BoundsCounts {
        self.n += other.n;
        self.hits_sum += other.hits_sum;
        self.hits_max += other.hits_max;
        for (a, b) in self.delta.iter_mut().zip(other.delta) {
            *a += b;
        }
        self
    }
}

fn bounds_counts<R: Rng>(b: &[f64], law: &InitialLaw, x: f64, epsilon: f64, samples: usize, rng: &mut R) -> BoundsCounts {
    let bmax = b.iter().copied().fold(0.0, f64::max);
    let mut out = BoundsCounts {
        n: samples as u64,
        hits_sum: 0,
        hits_max: 0,
        delta: vec![0; b.len()],
    };
    let mut xs = vec![0.0; b.len()];
    for _ in 0..samples {
        let mut s = 0.0;
        let mut m: f64 = 0.0;
        for &bj in b {
            let v = bj * law.sample(rng);
            s += v;
            m = m.max(v.abs());
        }
        out.hits_sum += (s.abs() > x) as u64;
        out.hits_max += (m > x) as u64;
    }
    let y = epsilon * x;
    for _ in 0..samples {
        let mut s = 0.0;
        for (xj, &bj) in xs.iter_mut().zip(b) {
            *xj = law.sample(rng);
            s += bj * *xj;
        }
        let s = s.abs();
        for (c, xj) in out.delta.iter_mut().zip(&xs) {
            *c += (s + bmax * xj.abs() <= y) as u64;
        }
    }
    out
}

fn check_bounds(b: &[f64], x: f64, epsilon: f64, gamma: f64) -> Result<()> {
    if b.is_empty() || b.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || b.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("weights must be non-negative and not all zero".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(gamma > 0.0) || !(x > 0.0) {
        return Err(Error::InvalidArgument("gamma and x must be positive".into()));
    }
    Ok(())
}

/// Evaluate the bounds from finished counts.
pub fn bounds_report(
    b: &[f64],
    law: &InitialLaw,
    x: f64,
    epsilon: f64,
    gamma: f64,
    counts: &BoundsCounts,
) -> Result<BoundsReport> {
    check_bounds(b, x, epsilon, gamma)?;
    let prof = law.tail_profile()?;
    let (a, c0, k0, k1) = (prof.alpha, prof.c0, prof.k0, prof.k1);
    let bmax = b.iter().copied().fold(0.0, f64::max);
    let sb: f64 = b.iter().map(|&v| if v > 0.0 { v.powf(a) } else { 0.0 }).sum();
    let rbar = |y: f64| prof.envelope(y);
    let xa = x.powf(a);
    let n = counts.n as f64;
    let delta = counts.delta.iter().copied().min().unwrap_or(0) as f64 / n;

    let lower = delta * c0 * (1.0 - rbar(x * (1.0 + epsilon) / bmax)) * sb / (1.0 + epsilon).powf(a)
        - k0 * k0 * sb * sb / (xa * (1.0 + epsilon).powf(2.0 * a));
    let upper = (c0 / (1.0 - epsilon).powf(a) * (1.0 + rbar(x * (1.0 - epsilon) / bmax))
        + 2.0 * k0 / (epsilon * epsilon * (2.0 - a) * x.powf((2.0 - a) * (1.0 - gamma))))
        * sb
        + (k0 * k0 / x.powf(a * (2.0 * gamma - 1.0))
            + k1 / (epsilon * epsilon * x.powf(2.0 - a + 2.0 * (a - 1.0) * gamma)))
            * sb
            * sb;
    let max_lower = c0 * sb * (1.0 - rbar(x / bmax)) - k0 * k0 * sb * sb / xa;
    let max_upper = c0 * sb * (1.0 + rbar(x / bmax));

    let p = counts.hits_sum as f64 / n;
    let pm = counts.hits_max as f64 / n;
    Ok(BoundsReport {
        n: b.len(),
        b: b.to_vec(),
        x,
        epsilon,
        gamma,
        lower,
        upper,
        max_lower,
        max_upper,
        delta,
        mc_estimate: xa * p,
        mc_se: xa * binomial_se(p, counts.n),
        mc_max: xa * pm,
        mc_max_se: xa * binomial_se(pm, counts.n),
    })
}

/// Finite-n sandwich bounds for `S_n = Σ b_j X_j` with Monte Carlo checks.
/// The `Δ` factor uses a separate batch of `samples` draws.
pub fn lemma_bounds<R: Rng>(
    b: &[f64],
    law: &InitialLaw,
    x: f64,
    epsilon: f64,
    gamma: f64,
    samples: u64,
    rng: &mut R,
) -> Result<BoundsReport> {
    check_bounds(b, x, epsilon, gamma)?;
    let counts = bounds_counts(b, law, x, epsilon, samples as usize, rng);
    bounds_report(b, law, x, epsilon, gamma, &counts)
}

pub fn lemma_bounds_par(
    b: &[f64],
    law: &InitialLaw,
    x: f64,
    epsilon: f64,
    gamma: f64,
    samples: u64,
    par: &Parallel,
) -> Result<BoundsReport> {
    check_bounds(b, x, epsilon, gamma)?;
    let counts = par
        .fold_chunks(
            "bounds",
            samples as usize,
            |rng, len| bounds_counts(b, law, x, epsilon, len, rng),
            BoundsCounts::merge,
        )
        .ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
    bounds_report(b, law, x, epsilon, gamma, &counts)
}

/// Residual of `∂_t 𝔥 + 𝔥 = E[𝔥(x/L) 𝔥(x/R)]` evaluated on empirical
/// CDFs of `H` at `t` and `t + δ` (independent samples), with `𝔥(x/0)`
/// read as `0` for `x < 0` and `1` otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeResidual {
    pub residual: f64,
    pub se: f64,
    pub cdf_t: f64,
    pub cdf_t_delta: f64,
    pub gain: f64,
}

fn h_samples<R: Rng>(kernel: &CollisionKernel, law: &InitialLaw, t: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut s = PathSampler::new(kernel, law, law.alpha());
    (0..n).map(|_| s.sample(t, rng).h).collect()
}

fn ratio_cdf(ecdf: &Ecdf, x: f64, w: f64) -> f64 {
    if w > 0.0 {
        ecdf.eval(x / w)
    } else if x < 0.0 {
        0.0
    } else {
        1.0
    }
}

fn gain_term<R: Rng>(kernel: &CollisionKernel, ecdf: &Ecdf, x: f64, n: usize, rng: &mut R) -> Moments {
    let mut m = Moments::new();
    for _ in 0..n {
        let (l, r) = kernel.sample(rng);
        m.push(ratio_cdf(ecdf, x, l) * ratio_cdf(ecdf, x, r));
    }
    m
}

fn check_ode(delta: f64, x: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 0.1], got {delta}")));
    }
    if x == 0.0 || !x.is_finite() {
        return Err(Error::InvalidArgument("x must be finite and non-zero".into()));
    }
    Ok(())
}

fn ode_report(e0: &Ecdf, e1: &Ecdf, gain: &Moments, x: f64, delta: f64) -> OdeResidual {
    let (n0, n1) = (e0.len() as u64, e1.len() as u64);
    let p0 = e0.eval(x);
    let p1 = e1.eval(x);
    let residual = (p1 - p0) / delta + p0 - gain.mean;
    let v1 = (binomial_se(p1, n1) / delta).powi(2);
    let v0 = ((1.0 / delta - 1.0) * binomial_se(p0, n0)).powi(2);
    OdeResidual {
        residual,
        se: (v1 + v0 + gain.std_error().powi(2)).sqrt(),
        cdf_t: p0,
        cdf_t_delta: p1,
        gain: gain.mean,
    }
}

pub fn max_ode_residual<R: Rng>(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    t: f64,
    x: f64,
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<OdeResidual> {
    check_ode(delta, x)?;
    let e0 = Ecdf::new(h_samples(kernel, law, t, samples, rng));
    let e1 = Ecdf::new(h_samples(kernel, law, t + delta, samples, rng));
    let gain = gain_term(kernel, &e0, x, samples, rng);
    Ok(ode_report(&e0, &e1, &gain, x, delta))
}

#[allow(clippy::too_many_arguments)]
pub fn max_ode_residual_par(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    t: f64,
    x: f64,
    delta: f64,
    samples: usize,
    par: &Parallel,
) -> Result<OdeResidual> {
    check_ode(delta, x)?;
    let collect = |tag: &str, tt: f64| {
        par.map_chunks(tag, samples, |rng, len| h_samples(kernel, law, tt, len, rng))
            .concat()
    };
    let e0 = Ecdf::new(collect("ode-h0", t));
    let e1 = Ecdf::new(collect("ode-h1", t + delta));
    let gain = par
        .fold_chunks("ode-gain", samples, |rng, len| gain_term(kernel, &e0, x, len, rng), Moments::merge)
        .unwrap_or_default();
    Ok(ode_report(&e0, &e1, &gain, x, delta))
}
