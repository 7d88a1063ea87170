//! Collision kernels `(L, R)`, the spectral function and the
//! large-deviation regime table.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// User-provided law of the pair `(L, R)`.
///
/// Implementations must return non-negative pairs.
pub trait PairSampler: Send + Sync + fmt::Debug {
    fn sample_pair(&self, rng: &mut dyn RngCore) -> (f64, f64);

    /// `E[L^s + R^s]` when known in closed form.
    fn moment(&self, _s: f64) -> Option<f64> {
        None
    }
}

/// One atom `((left, right), prob)` of a discrete kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub left: f64,
    pub right: f64,
    pub prob: f64,
}

#[derive(Clone, Debug)]
pub enum KernelKind {
    Deterministic { left: f64, right: f64 },
    /// `θ` uniform on `[0, 2π)`, `L = |sin θ|`, `R = |cos θ|`.
    Kac,
    Mixture(Vec<Atom>),
    Custom(Arc<dyn PairSampler>),
}

/// Law of the non-negative collision pair `(L, R)`.
#[derive(Clone, Debug)]
pub struct CollisionKernel {
    kind: KernelKind,
    cumulative: Vec<f64>,
}

impl CollisionKernel {
    pub fn deterministic(left: f64, right: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && left >= 0.0 && right >= 0.0) {
            return Err(Error::InvalidKernel(format!(
                "deterministic weights must be finite and non-negative, got ({left}, {right})"
            )));
        }
        Ok(Self {
            kind: KernelKind::Deterministic { left, right },
            cumulative: Vec::new(),
        })
    }

    /// `ℓ = r = 2^{-1/α}`, the kernel with `Q(α) = 0`.
    pub fn steady_state(alpha: f64) -> Result<Self> {
        let w = 2f64.powf(-1.0 / alpha);
        Self::deterministic(w, w)
    }

    pub fn kac() -> Self {
        Self {
            kind: KernelKind::Kac,
            cumulative: Vec::new(),
        }
    }

    pub fn mixture(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidKernel("mixture needs at least one atom".into()));
        }
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(atoms.len());
        for a in &atoms {
            if !(a.left.is_finite() && a.right.is_finite() && a.left >= 0.0 && a.right >= 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "mixture atom ({}, {}) must be finite and non-negative",
                    a.left, a.right
                )));
            }
            if !(a.prob.is_finite() && a.prob > 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "mixture probability {} must be positive",
                    a.prob
                )));
            }
            total += a.prob;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidKernel(format!(
                "mixture probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            kind: KernelKind::Mixture(atoms),
            cumulative,
        })
    }

    pub fn custom(sampler: Arc<dyn PairSampler>) -> Self {
        Self {
            kind: KernelKind::Custom(sampler),
            cumulative: Vec::new(),
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// `P{L>0} + P{R>0}` when it can be computed exactly.
    pub fn positive_mass(&self) -> Option<f64> {
        let pos = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
        match &self.kind {
            KernelKind::Deterministic { left, right } => Some(pos(*left) + pos(*right)),
            KernelKind::Kac => Some(2.0),
            KernelKind::Mixture(atoms) => Some(
                atoms
                    .iter()
                    .map(|a| a.prob * (pos(a.left) + pos(a.right)))
                    .sum(),
            ),
            KernelKind::Custom(_) => None,
        }
    }

    /// Standing non-degeneracy assumption `P{L>0} + P{R>0} > 1`.
    /// Custom kernels cannot be checked and are assumed to satisfy it.
    pub fn is_nondegenerate(&self) -> bool {
        self.positive_mass().is_none_or(|m| m > 1.0 + 1e-12)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        match &self.kind {
            KernelKind::Deterministic { left, right } => (*left, *right),
            KernelKind::Kac => {
                let theta = 2.0 * PI * rng.random::<f64>();
                let (s, c) = theta.sin_cos();
                (s.abs(), c.abs())
            }
            KernelKind::Mixture(atoms) => {
                let u: f64 = rng.random();
                let k = self
                    .cumulative
                    .partition_point(|&c| c <= u)
                    .min(atoms.len() - 1);
                (atoms[k].left, atoms[k].right)
            }
            KernelKind::Custom(s) => s.sample_pair(rng),
        }
    }

    /// `E[L^s + R^s]` in closed form, if this kind admits one.
    /// Uses `0^s = 0`, also at `s = 0`.
    pub fn exact_moment(&self, s: f64) -> Option<f64> {
        let p = |v: f64| if v > 0.0 { v.powf(s) } else { 0.0 };
        match &self.kind {
            KernelKind::Deterministic { left, right } => Some(p(*left) + p(*right)),
            // E|cos θ|^s = Γ((s+1)/2) / (√π Γ(s/2+1)), same for |sin θ|
            KernelKind::Kac => {
                Some(2.0 * (ln_gamma((s + 1.0) / 2.0) - ln_gamma(s / 2.0 + 1.0)).exp() / PI.sqrt())
            }
            KernelKind::Mixture(atoms) => {
                Some(atoms.iter().map(|a| a.prob * (p(a.left) + p(a.right))).sum())
            }
            KernelKind::Custom(c) => c.moment(s),
        }
    }

    /// `Q(s)` from the closed form, if any.
    pub fn exact_q(&self, s: f64) -> Option<f64> {
        self.exact_moment(s).map(|m| m - 1.0)
    }
}

/// Draw one collision pair.
pub fn sample_collision<R: Rng>(kernel: &CollisionKernel, rng: &mut R) -> (f64, f64) {
    kernel.sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Work allowed to [`spectral`] when no closed form is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Samples(usize),
    Nodes(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralReport {
    pub s: f64,
    /// `Q(s) = E[L^s + R^s] − 1`; `+∞` when the moment looks infinite.
    pub q: f64,
    /// `μ(s) = Q(s)/s`.
    pub mu: f64,
    pub method: SpectralMethod,
    pub std_error: f64,
}

impl SpectralReport {
    fn exact(s: f64, q: f64, method: SpectralMethod) -> Self {
        Self {
            s,
            q,
            mu: q / s,
            method,
            std_error: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite()
    }
}

/// Minimum Monte Carlo budget accepted by [`spectral`].
pub const MIN_SPECTRAL_SAMPLES: usize = 1_000;

/// Estimate the spectral data at `s`.
///
/// Deterministic, mixture and Kac kernels use closed forms, except that
/// a [`Budget::Nodes`] request on the Kac kernel runs composite Simpson
/// quadrature of `(2/π)∫_0^{π/2} (sin^s φ + cos^s φ) dφ`. Custom kernels
/// without a known moment fall back to Monte Carlo; a single draw carrying
/// more than half of the running sum is taken as evidence of an infinite
/// moment and reported as `q = +∞`.
pub fn spectral<R: Rng>(
    kernel: &CollisionKernel,
    s: f64,
    budget: Budget,
    rng: &mut R,
) -> Result<SpectralReport> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Domain(format!("spectral needs s > 0, got {s}")));
    }
    match (&kernel.kind, budget) {
        (KernelKind::Kac, Budget::Nodes(nodes)) => {
            let q = kac_quadrature(s, nodes.max(2)) - 1.0;
            Ok(SpectralReport::exact(s, q, SpectralMethod::Quadrature))
        }
        _ => {
            if let Some(q) = kernel.exact_q(s) {
                return Ok(SpectralReport::exact(s, q, SpectralMethod::ClosedForm));
            }
            let n = match budget {
                Budget::Samples(n) if n >= MIN_SPECTRAL_SAMPLES => n,
                Budget::Samples(n) => {
                    return Err(Error::InvalidArgument(format!(
                        "monte-carlo spectral budget {n} below {MIN_SPECTRAL_SAMPLES}"
                    )))
                }
                Budget::Nodes(_) => {
                    return Err(Error::InvalidArgument(
                        "quadrature is only available for the kac kernel".into(),
                    ))
                }
            };
            Ok(spectral_monte_carlo(kernel, s, n, rng))
        }
    }
}

fn kac_quadrature(s: f64, nodes: usize) -> f64 {
    let m = if nodes % 2 == 0 { nodes } else { nodes + 1 };
    let h = (PI / 2.0) / m as f64;
    let f = |phi: f64| {
        let (sn, cs) = phi.sin_cos();
        let p = |v: f64| if v > 0.0 { v.powf(s) } else { 0.0 };
        p(sn) + p(cs)
    };
    let mut acc = f(0.0) + f(PI / 2.0);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0 * (2.0 / PI)
}

fn spectral_monte_carlo<R: Rng>(
    kernel: &CollisionKernel,
    s: f64,
    n: usize,
    rng: &mut R,
) -> SpectralReport {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut largest: f64 = 0.0;
    let p = |v: f64| if v > 0.0 { v.powf(s) } else { 0.0 };
    for _ in 0..n {
        let (l, r) = kernel.sample(rng);
        let v = p(l) + p(r);
        if !v.is_finite() {
            return diverged(s);
        }
        sum += v;
        sum_sq += v * v;
        largest = largest.max(v);
    }
    if !sum.is_finite() || (sum > 0.0 && largest > 0.5 * sum) {
        return diverged(s);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let q = mean - 1.0;
    SpectralReport {
        s,
        q,
        mu: q / s,
        method: SpectralMethod::MonteCarlo,
        std_error: (var / nf).sqrt(),
    }
}

fn diverged(s: f64) -> SpectralReport {
    SpectralReport {
        s,
        q: f64::INFINITY,
        mu: f64::INFINITY,
        method: SpectralMethod::MonteCarlo,
        std_error: f64::INFINITY,
    }
}

/// Default sample budget used when a kernel has no closed form.
pub const DEFAULT_SPECTRAL_SAMPLES: usize = 1_000_000;

/// `Q(s)` using the closed form when available, Monte Carlo otherwise.
pub fn q_value<R: Rng>(kernel: &CollisionKernel, s: f64, rng: &mut R) -> Result<f64> {
    spectral(kernel, s, Budget::Samples(DEFAULT_SPECTRAL_SAMPLES), rng).map(|r| r.q)
}

/// Rows of the growth table `h(t)` plus the unrestricted regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegimeCase {
    /// `μ(2α) < μ(α)` and `2S(α) > −1`: no constraint on `x_t`.
    Unrestricted,
    /// `μ(2α) < μ(α)`, `2S(α) = −1`: `h = t`.
    BelowCritical,
    /// `μ(2α) < μ(α)`, `2S(α) < −1`: `h = e^{−(2S(α)+1)t}`.
    BelowSubcritical,
    /// `μ(2α) > μ(α)`: `h = e^{2α(μ(2α)−μ(α))t}`.
    Above,
    /// `μ(2α) = μ(α)`, `S(α) > 0`: `h = e^{ηt}`.
    EqualSupercritical,
    /// `μ(2α) = μ(α)`, `2S(α) < −1`: `h = t e^{−(2S(α)+1)t}`.
    EqualSubcritical,
    /// `μ(2α) = μ(α)`, `2S(α) = −1`: `h = t²`.
    EqualCritical,
    /// `μ(2α) = μ(α)`, `−1 < 2S(α) ≤ 0`: `h = t`.
    EqualModerate,
}

impl RegimeCase {
    pub fn id(self) -> &'static str {
        match self {
            RegimeCase::Unrestricted => "unrestricted",
            RegimeCase::BelowCritical => "mu(2a)<mu(a),2S(a)=-1",
            RegimeCase::BelowSubcritical => "mu(2a)<mu(a),2S(a)<-1",
            RegimeCase::Above => "mu(2a)>mu(a)",
            RegimeCase::EqualSupercritical => "mu(2a)=mu(a),S(a)>0",
            RegimeCase::EqualSubcritical => "mu(2a)=mu(a),2S(a)<-1",
            RegimeCase::EqualCritical => "mu(2a)=mu(a),2S(a)=-1",
            RegimeCase::EqualModerate => "mu(2a)=mu(a),-1<2S(a)<=0",
        }
    }
}

impl fmt::Display for RegimeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regime {
    pub alpha: f64,
    pub s_alpha: f64,
    pub s_2alpha: f64,
    pub mu_alpha: f64,
    pub mu_2alpha: f64,
    pub case: RegimeCase,
    /// Growth rate used only by [`RegimeCase::EqualSupercritical`].
    pub eta: f64,
}

pub const DEFAULT_REGIME_TOL: f64 = 1e-9;
pub const DEFAULT_ETA: f64 = 0.1;

fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

impl Regime {
    /// Classify from `S(α)` and `S(2α)`; equalities are decided with a
    /// relative tolerance `tol` (absolute below magnitude 1).
    pub fn from_spectra(alpha: f64, s_alpha: f64, s_2alpha: f64, eta: f64, tol: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,2), got {alpha}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
        }
        if !s_alpha.is_finite() {
            return Err(Error::RegimeUnavailable(format!("S(alpha) is not finite at alpha={alpha}")));
        }
        if !s_2alpha.is_finite() {
            return Err(Error::RegimeUnavailable(format!(
                "S(2 alpha) = +inf at alpha={alpha}"
            )));
        }
        let mu_alpha = s_alpha / alpha;
        let mu_2alpha = s_2alpha / (2.0 * alpha);
        let two_s = 2.0 * s_alpha;
        let critical = approx_eq(two_s, -1.0, tol);
        let case = if approx_eq(mu_2alpha, mu_alpha, tol) {
            if critical {
                RegimeCase::EqualCritical
            } else if two_s < -1.0 {
                RegimeCase::EqualSubcritical
            } else if approx_eq(s_alpha, 0.0, tol) || s_alpha < 0.0 {
                RegimeCase::EqualModerate
            } else {
                RegimeCase::EqualSupercritical
            }
        } else if mu_2alpha > mu_alpha {
            RegimeCase::Above
        } else if critical {
            RegimeCase::BelowCritical
        } else if two_s < -1.0 {
            RegimeCase::BelowSubcritical
        } else {
            RegimeCase::Unrestricted
        };
        Ok(Self {
            alpha,
            s_alpha,
            s_2alpha,
            mu_alpha,
            mu_2alpha,
            case,
            eta,
        })
    }

    /// Growth function `h(t)`; `1` in the unrestricted regime.
    pub fn h(&self, t: f64) -> f64 {
        let a = self.alpha;
        match self.case {
            RegimeCase::Unrestricted => 1.0,
            RegimeCase::BelowCritical | RegimeCase::EqualModerate => t,
            RegimeCase::BelowSubcritical => (-(2.0 * self.s_alpha + 1.0) * t).exp(),
            RegimeCase::Above => (2.0 * a * (self.mu_2alpha - self.mu_alpha) * t).exp(),
            RegimeCase::EqualSupercritical => (self.eta * t).exp(),
            RegimeCase::EqualSubcritical => t * (-(2.0 * self.s_alpha + 1.0) * t).exp(),
            RegimeCase::EqualCritical => t * t,
        }
    }
}

/// Classify the large-deviation regime of `kernel` at `alpha`.
///
/// The kernel must satisfy `P{L>0} + P{R>0} > 1`. Kernels without a closed
/// form are evaluated by Monte Carlo with [`DEFAULT_SPECTRAL_SAMPLES`] draws.
pub fn classify_regime<R: Rng>(
    kernel: &CollisionKernel,
    alpha: f64,
    eta: f64,
    tol: f64,
    rng: &mut R,
) -> Result<Regime> {
    if !kernel.is_nondegenerate() {
        return Err(Error::InvalidKernel(
            "kernel violates P{L>0} + P{R>0} > 1".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,2), got {alpha}")));
    }
    let s_alpha = q_value(kernel, alpha, rng)?;
    let s_2alpha = q_value(kernel, 2.0 * alpha, rng)?;
    Regime::from_spectra(alpha, s_alpha, s_2alpha, eta, tol)
}

/// Evaluate `h(t)` for a classified regime.
pub fn h_of_t(regime: &Regime, t: f64) -> f64 {
    regime.h(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::Moments;

    fn rng() -> crate::Stream {
        stream(2024, "kernels-test", 0)
    }

    #[test]
    fn deterministic_sample_is_constant() {
        let k = CollisionKernel::deterministic(0.5, 0.5).unwrap();
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(sample_collision(&k, &mut r), (0.5, 0.5));
        }
    }

    #[test]
    fn kac_pairs_on_unit_circle() {
        let k = CollisionKernel::kac();
        let mut r = rng();
        for _ in 0..10_000 {
            let (l, rr) = k.sample(&mut r);
            assert!(l >= 0.0 && rr >= 0.0);
            assert!((l * l + rr * rr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_mean_of_left() {
        let k = CollisionKernel::mixture(vec![
            Atom { left: 1.0, right: 0.0, prob: 0.5 },
            Atom { left: 0.0, right: 1.0, prob: 0.5 },
        ])
        .unwrap();
        let mut r = rng();
        let m: Moments = (0..100_000).map(|_| k.sample(&mut r).0).collect();
        assert!((m.mean - 0.5).abs() <= 4.0 * m.std_error(), "mean {}", m.mean);
        // P{L>0}+P{R>0} = 1: samplable but not admissible for the theory
        assert!(!k.is_nondegenerate());
    }

    #[test]
    fn rejects_invalid_kernels() {
        assert!(CollisionKernel::deterministic(-0.1, 1.0).is_err());
        assert!(CollisionKernel::deterministic(f64::NAN, 1.0).is_err());
        assert!(CollisionKernel::mixture(vec![]).is_err());
        assert!(CollisionKernel::mixture(vec![Atom { left: 1.0, right: 1.0, prob: 0.7 }]).is_err());
        assert!(CollisionKernel::mixture(vec![
            Atom { left: 1.0, right: 1.0, prob: 1.2 },
            Atom { left: 1.0, right: 1.0, prob: -0.2 },
        ])
        .is_err());
    }

    #[test]
    fn spectral_closed_forms() {
        let mut r = rng();
        let alpha = 1.3;
        let k = CollisionKernel::steady_state(alpha).unwrap();
        let rep = spectral(&k, alpha, Budget::Samples(1000), &mut r).unwrap();
        assert_eq!(rep.method, SpectralMethod::ClosedForm);
        assert!(rep.q.abs() < 1e-12);

        let kac = CollisionKernel::kac();
        let q2 = spectral(&kac, 2.0, Budget::Samples(1000), &mut r).unwrap();
        assert!(q2.q.abs() < 1e-14);
        assert_eq!(q2.std_error, 0.0);
    }

    #[test]
    fn kac_q1_matches_independent_quadrature() {
        // oracle: midpoint rule for (1/2π)∫_0^{2π}(|sin θ|+|cos θ|)dθ
        let m = 200_000;
        let h = 2.0 * PI / m as f64;
        let oracle: f64 = (0..m)
            .map(|i| {
                let th = (i as f64 + 0.5) * h;
                th.sin().abs() + th.cos().abs()
            })
            .sum::<f64>()
            * h
            / (2.0 * PI)
            - 1.0;
        assert!((oracle - 0.27324).abs() < 1e-5);
        let q = CollisionKernel::kac().exact_q(1.0).unwrap();
        assert!((q - oracle).abs() < 1e-9, "{q} vs {oracle}");
        assert!((q - (4.0 / PI - 1.0)).abs() < 1e-14);

        let quad = spectral(&CollisionKernel::kac(), 1.0, Budget::Nodes(2000), &mut rng()).unwrap();
        assert_eq!(quad.method, SpectralMethod::Quadrature);
        assert!((quad.q - q).abs() < 1e-10);
    }

    #[test]
    fn spectral_rejects_bad_inputs() {
        let mut r = rng();
        assert!(spectral(&CollisionKernel::kac(), 0.0, Budget::Samples(1000), &mut r).is_err());
        #[derive(Debug)]
        struct Uniform;
        impl PairSampler for Uniform {
            fn sample_pair(&self, rng: &mut dyn RngCore) -> (f64, f64) {
                (rng.random(), rng.random())
            }
        }
        let k = CollisionKernel::custom(Arc::new(Uniform));
        assert!(spectral(&k, 1.0, Budget::Samples(10), &mut r).is_err());
        assert!(spectral(&k, 1.0, Budget::Nodes(100), &mut r).is_err());
        let rep = spectral(&k, 1.0, Budget::Samples(100_000), &mut r).unwrap();
        // E[U + U'] - 1 = 0
        assert_eq!(rep.method, SpectralMethod::MonteCarlo);
        assert!(rep.q.abs() < 4.0 * rep.std_error);
    }

    #[test]
    fn spectral_flags_infinite_moment() {
        // L = U^{-2}: E[L^s] = ∞ for s ≥ 1/2
        #[derive(Debug)]
        struct Heavy;
        impl PairSampler for Heavy {
            fn sample_pair(&self, rng: &mut dyn RngCore) -> (f64, f64) {
                let u = crate::rng::open_unit(rng);
                (u.powi(-2), 0.5)
            }
        }
        let k = CollisionKernel::custom(Arc::new(Heavy));
        let rep = spectral(&k, 2.0, Budget::Samples(10_000), &mut rng()).unwrap();
        assert!(!rep.is_finite());
    }

    #[test]
    fn q_is_convex_on_grids() {
        let kernels = [
            CollisionKernel::kac(),
            CollisionKernel::deterministic(0.3, 0.9).unwrap(),
            CollisionKernel::mixture(vec![
                Atom { left: 0.2, right: 0.9, prob: 0.3 },
                Atom { left: 0.7, right: 0.7, prob: 0.7 },
            ])
            .unwrap(),
        ];
        let grid = [0.25, 0.5, 0.9, 1.0, 1.5, 2.0, 3.0, 4.0];
        for k in &kernels {
            for i in 0..grid.len() {
                for j in i + 1..grid.len() {
                    for l in j + 1..grid.len() {
                        let (s1, s2, s3) = (grid[i], grid[j], grid[l]);
                        let lam = (s3 - s2) / (s3 - s1);
                        let q = |s| k.exact_q(s).unwrap();
                        assert!(q(s2) <= lam * q(s1) + (1.0 - lam) * q(s3) + 1e-12);
                    }
                }
            }
            for s in grid {
                assert!(k.exact_q(s).unwrap() >= -1.0);
            }
        }
    }

    #[test]
    fn regime_examples() {
        let mut r = rng();
        let a = 1.5;
        let reg = classify_regime(&CollisionKernel::steady_state(a).unwrap(), a, DEFAULT_ETA, DEFAULT_REGIME_TOL, &mut r).unwrap();
        assert!(reg.s_alpha.abs() < 1e-12);
        assert!((reg.s_2alpha + 0.5).abs() < 1e-12);
        assert_eq!(reg.case, RegimeCase::Unrestricted);

        let w = 0.25f64.powf(1.0 / a);
        let reg = classify_regime(&CollisionKernel::deterministic(w, w).unwrap(), a, DEFAULT_ETA, DEFAULT_REGIME_TOL, &mut r).unwrap();
        assert!((reg.s_alpha + 0.5).abs() < 1e-12);
        assert!((reg.s_2alpha + 7.0 / 8.0).abs() < 1e-12);
        assert!(reg.mu_2alpha > reg.mu_alpha);
        assert_eq!(reg.case, RegimeCase::Above);

        let reg = classify_regime(&CollisionKernel::deterministic(1.0, 1.0).unwrap(), a, DEFAULT_ETA, DEFAULT_REGIME_TOL, &mut r).unwrap();
        assert_eq!(reg.s_alpha, 1.0);
        assert_eq!(reg.s_2alpha, 1.0);
        assert!((reg.mu_2alpha - 1.0 / (2.0 * a)).abs() < 1e-15);
        assert!((reg.mu_alpha - 1.0 / a).abs() < 1e-15);
        assert_eq!(reg.case, RegimeCase::Unrestricted);
    }

    #[test]
    fn regime_table_rows() {
        let a = 1.0;
        let case = |s1: f64, s2: f64| Regime::from_spectra(a, s1, s2, 0.1, 1e-9).unwrap().case;
        // μ(2α) = S(2α)/2 with α = 1
        assert_eq!(case(-0.5, -1.2), RegimeCase::BelowCritical);
        assert_eq!(case(-0.6, -1.4), RegimeCase::BelowSubcritical);
        assert_eq!(case(-0.5, -0.2), RegimeCase::Above);
        assert_eq!(case(0.5, 1.0), RegimeCase::EqualSupercritical);
        assert_eq!(case(-0.6, -1.2), RegimeCase::EqualSubcritical);
        assert_eq!(case(-0.5, -1.0), RegimeCase::EqualCritical);
        assert_eq!(case(-0.2, -0.4), RegimeCase::EqualModerate);
        assert_eq!(case(0.0, 0.0), RegimeCase::EqualModerate);
        assert_eq!(case(0.3, 0.1), RegimeCase::Unrestricted);
        // borderline within tolerance
        assert_eq!(case(-0.5 + 1e-12, -1.2), RegimeCase::BelowCritical);
    }

    #[test]
    fn regime_stable_under_tighter_tolerance() {
        for (s1, s2) in [(-0.6, -0.9), (-0.5, -0.2), (0.3, 0.1), (-0.25, -0.875)] {
            let a = Regime::from_spectra(1.5, s1, s2, 0.1, 1e-9).unwrap();
            let b = Regime::from_spectra(1.5, s1, s2, 0.1, 1e-10).unwrap();
            assert_eq!(a.case, b.case);
        }
    }

    #[test]
    fn regime_unavailable_when_2alpha_moment_infinite() {
        let e = Regime::from_spectra(1.0, 0.1, f64::INFINITY, 0.1, 1e-9).unwrap_err();
        assert!(matches!(e, Error::RegimeUnavailable(_)));
    }

    #[test]
    fn h_examples() {
        let a = 1.5;
        // S(2α) − 2S(α) = 1/8
        let reg = Regime::from_spectra(a, -0.5, -0.875, 0.1, 1e-9).unwrap();
        assert_eq!(reg.case, RegimeCase::Above);
        assert!((h_of_t(&reg, 8.0) - 1f64.exp()).abs() < 1e-12);

        let reg = Regime::from_spectra(1.0, -0.5, -1.2, 0.1, 1e-9).unwrap();
        assert_eq!(reg.case, RegimeCase::BelowCritical);
        assert_eq!(h_of_t(&reg, 5.0), 5.0);

        let reg = Regime::from_spectra(1.0, 0.3, 0.1, 0.1, 1e-9).unwrap();
        assert_eq!(h_of_t(&reg, 123.0), 1.0);

        let reg = Regime::from_spectra(1.0, 0.5, 1.0, 0.2, 1e-9).unwrap();
        assert!((h_of_t(&reg, 10.0) - 2f64.exp()).abs() < 1e-12);
        let reg = Regime::from_spectra(1.0, -0.5, -1.0, 0.1, 1e-9).unwrap();
        assert_eq!(h_of_t(&reg, 3.0), 9.0);
    }
}
