//! Samplers for the Yule count `ν_t`, the solution process `V_t`, the
//! max-process `H_t`, and the Wild-sum oracle for `H` given `ν_t = n`.

use rand::Rng;

use crate::initial_data::InitialLaw;
use crate::kernels::CollisionKernel;
use crate::rng::open_unit;
use crate::weights::WeightArray;
use crate::{Error, Result};

/// One draw of `(ν_t, V_t, H_t, M_{ν_t}(α), β_(ν_t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub n: usize,
    pub v: f64,
    pub h: f64,
    pub m_alpha: f64,
    pub beta_max: f64,
}

/// `ν_t`, geometric on `{1, 2, …}` with success probability `e^{-t}`,
/// by inversion: `1 + ⌊ln U / ln(1 − e^{-t})⌋`.
pub fn sample_yule<R: Rng>(t: f64, rng: &mut R) -> usize {
    if t <= 0.0 {
        return 1;
    }
    let log_q = (-(-t).exp()).ln_1p();
    let u = open_unit(rng);
    let k = (u.ln() / log_q).floor();
    if k >= (usize::MAX / 2) as f64 {
        usize::MAX / 2
    } else {
        1 + k as usize
    }
}

/// Reusable buffers for repeated path sampling.
#[derive(Clone, Debug)]
pub struct PathSampler<'a> {
    kernel: &'a CollisionKernel,
    law: &'a InitialLaw,
    alpha: f64,
    weights: WeightArray,
}

impl<'a> PathSampler<'a> {
    pub fn new(kernel: &'a CollisionKernel, law: &'a InitialLaw, alpha: f64) -> Self {
        Self {
            kernel,
            law,
            alpha,
            weights: WeightArray::new(&[alpha]),
        }
    }

    /// The weight array of the most recent sample.
    pub fn weights(&self) -> &WeightArray {
        &self.weights
    }

    /// Draw with `ν_t` already fixed to `n`.
    pub fn sample_given_n<R: Rng>(&mut self, t: f64, n: usize, rng: &mut R) -> PathSample {
        self.weights.reset();
        self.weights.grow_to(self.kernel, n, rng);
        let mut v = 0.0;
        let mut h: f64 = 0.0;
        let mut beta_max: f64 = 0.0;
        for &b in self.weights.betas() {
            let leaf = b * self.law.sample(rng);
            v += leaf;
            h = h.max(leaf.abs());
            beta_max = beta_max.max(b);
        }
        PathSample {
            t,
            n,
            v,
            h,
            m_alpha: self.weights.m_sum(self.alpha).unwrap_or(f64::NAN),
            beta_max,
        }
    }

    pub fn sample<R: Rng>(&mut self, t: f64, rng: &mut R) -> PathSample {
        let n = sample_yule(t, rng);
        self.sample_given_n(t, n, rng)
    }

    /// Like [`sample`](Self::sample) but also returns the per-leaf
    /// products `β_j X_j`.
    pub fn sample_with_leaves<R: Rng>(&mut self, t: f64, rng: &mut R) -> (PathSample, Vec<f64>) {
        let n = sample_yule(t, rng);
        self.weights.reset();
        self.weights.grow_to(self.kernel, n, rng);
        let leaves: Vec<f64> = self
            .weights
            .betas()
            .iter()
            .map(|&b| b * self.law.sample(rng))
            .collect();
        let sample = PathSample {
            t,
            n,
            v: leaves.iter().sum(),
            h: leaves.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
            m_alpha: self.weights.m_sum(self.alpha).unwrap_or(f64::NAN),
            beta_max: self.weights.beta_max(),
        };
        (sample, leaves)
    }
}

/// Draw `ν_t`, grow the weights to `ν_t` leaves, draw the `X_j`, and return
/// `V_t` and `H_t` built from the same weights and draws.
pub fn sample_path<R: Rng>(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    t: f64,
    alpha: f64,
    rng: &mut R,
) -> PathSample {
    PathSampler::new(kernel, law, alpha).sample(t, rng)
}

/// `(e^{-μ t} V, e^{-μ t} H)`.
pub fn rescaled(p: &PathSample, mu_alpha: f64) -> (f64, f64) {
    let f = (-mu_alpha * p.t).exp();
    (f * p.v, f * p.h)
}

/// Largest `n` accepted by [`wild_oracle_max`].
pub const WILD_MAX_N: usize = 12;

/// Draw from the Wild-sum law `q̃_n` of the max kernel: `q̃_1` is the law of
/// `|X|`; for `n ≥ 2` a split `(i, n−i)` with `i` uniform on `{1..n−1}`
/// is chosen and the result is `max(L·q̃_i, R·q̃_{n−i})`.
pub fn wild_oracle_max<R: Rng>(
    kernel: &CollisionKernel,
    law: &InitialLaw,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 || n > WILD_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "wild oracle needs 1 <= n <= {WILD_MAX_N}, got {n}"
        )));
    }
    Ok(wild_rec(kernel, law, n, rng))
}

fn wild_rec<R: Rng>(kernel: &CollisionKernel, law: &InitialLaw, n: usize, rng: &mut R) -> f64 {
    if n == 1 {
        return law.sample(rng).abs();
    }
    let i = rng.random_range(1..n);
    let (l, r) = kernel.sample(rng);
    let left = wild_rec(kernel, law, i, rng);
    let right = wild_rec(kernel, law, n - i, rng);
    (l * left).max(r * right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{binomial_se, ks_two_sample, Moments};
    use crate::weights::NormTable;

    fn pareto() -> InitialLaw {
        InitialLaw::symmetric_pareto(1.5, 1.0).unwrap()
    }

    #[test]
    fn yule_at_zero_is_one() {
        let mut rng = stream(1, "y", 0);
        for _ in 0..1000 {
            assert_eq!(sample_yule(0.0, &mut rng), 1);
        }
    }

    #[test]
    fn yule_pmf_at_ln2() {
        let mut rng = stream(2, "y", 0);
        let n = 100_000u64;
        let mut counts = [0u64; 13];
        for _ in 0..n {
            let k = sample_yule(std::f64::consts::LN_2, &mut rng);
            if k <= 12 {
                counts[k] += 1;
            }
        }
        for (k, &count) in counts.iter().enumerate().skip(1) {
            let p = 0.5f64.powi(k as i32);
            let phat = count as f64 / n as f64;
            assert!((phat - p).abs() <= 5.0 * binomial_se(p, n), "k={k}");
        }
    }

    #[test]
    fn yule_mean_at_two() {
        let mut rng = stream(3, "y", 0);
        let m: Moments = (0..100_000).map(|_| sample_yule(2.0, &mut rng) as f64).collect();
        let expected = 2f64.exp();
        assert!((m.mean - expected).abs() <= 4.0 * m.std_error());
    }

    #[test]
    fn path_at_time_zero() {
        let law = pareto();
        let k = CollisionKernel::kac();
        let mut rng = stream(4, "p", 0);
        let mut replay = stream(4, "p", 0);
        let p = sample_path(&k, &law, 0.0, 1.5, &mut rng);
        // t = 0 consumes no Yule draw; the only draw is X_1
        let x1 = law.sample(&mut replay);
        assert_eq!(p.n, 1);
        assert_eq!(p.v, x1);
        assert_eq!(p.h, x1.abs());
        assert_eq!(p.m_alpha, 1.0);
    }

    #[test]
    fn steady_state_kernel_path_conserves_mass() {
        let alpha = 1.5;
        let k = CollisionKernel::steady_state(alpha).unwrap();
        let law = pareto();
        let mut s = PathSampler::new(&k, &law, alpha);
        let mut rng = stream(5, "p", 0);
        for _ in 0..200 {
            let p = s.sample(3.0, &mut rng);
            assert!((p.m_alpha - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn h_is_max_of_leaf_products() {
        let k = CollisionKernel::kac();
        let law = pareto();
        let mut s = PathSampler::new(&k, &law, 1.5);
        let mut rng = stream(6, "p", 0);
        for _ in 0..100 {
            let (p, leaves) = s.sample_with_leaves(2.0, &mut rng);
            assert_eq!(leaves.len(), p.n);
            let max = leaves.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
            assert_eq!(p.h, max);
            assert!(p.h >= 0.0);
        }
    }

    #[test]
    fn normalized_mass_has_unit_mean() {
        let k = CollisionKernel::kac();
        let law = pareto();
        let s1 = k.exact_q(1.0).unwrap();
        let mut s = PathSampler::new(&k, &law, 1.0);
        let mut rng = stream(7, "p", 0);
        let t = 3.0;
        let m: Moments = (0..100_000)
            .map(|_| (-s1 * t).exp() * s.sample(t, &mut rng).m_alpha)
            .collect();
        assert!((m.mean - 1.0).abs() <= 4.0 * m.std_error(), "{}", m.mean);
    }

    #[test]
    fn mean_of_norm_at_yule_time() {
        let s1 = CollisionKernel::kac().exact_q(1.0).unwrap();
        let mut table = NormTable::new(s1).unwrap();
        let mut rng = stream(8, "p", 0);
        for t in [1.0, 2.0] {
            let m: Moments = (0..50_000)
                .map(|_| table.m(sample_yule(t, &mut rng)))
                .collect();
            assert!((m.mean - (s1 * t).exp()).abs() <= 4.0 * m.std_error());
        }
    }

    #[test]
    fn rescaled_examples() {
        let p = PathSample { t: 0.0, n: 1, v: 3.0, h: 3.0, m_alpha: 1.0, beta_max: 1.0 };
        assert_eq!(rescaled(&p, 0.7), (3.0, 3.0));
        let p = PathSample { t: 5.0, ..p };
        assert_eq!(rescaled(&p, 0.0), (3.0, 3.0));
        let p = PathSample { t: 4f64.ln(), v: 8.0, ..p };
        assert!((rescaled(&p, 1.0).0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wild_small_cases() {
        let k = CollisionKernel::kac();
        let law = pareto();
        let mut rng = stream(9, "w", 0);
        let mut replay = stream(9, "w", 0);
        let x = wild_oracle_max(&k, &law, 1, &mut rng).unwrap();
        assert_eq!(x, law.sample(&mut replay).abs());

        let v = wild_oracle_max(&k, &law, 2, &mut rng).unwrap();
        let i: usize = replay.random_range(1..2);
        assert_eq!(i, 1);
        let (l, r) = k.sample(&mut replay);
        let (a, b) = (law.sample(&mut replay).abs(), law.sample(&mut replay).abs());
        assert_eq!(v, (l * a).max(r * b));

        assert!(wild_oracle_max(&k, &law, 0, &mut rng).is_err());
        assert!(wild_oracle_max(&k, &law, 13, &mut rng).is_err());
    }

    #[test]
    fn wild_matches_tree_in_distribution() {
        let k = CollisionKernel::kac();
        let law = pareto();
        let mut rng = stream(10, "w", 0);
        let n = 30_000;
        let wild: Vec<f64> = (0..n).map(|_| wild_oracle_max(&k, &law, 4, &mut rng).unwrap()).collect();
        let mut s = PathSampler::new(&k, &law, 1.5);
        let tree: Vec<f64> = (0..n).map(|_| s.sample_given_n(0.0, 4, &mut rng).h).collect();
        let d = ks_two_sample(&wild, &tree);
        // 99.9% two-sample KS critical value: 1.95·sqrt(2/n)
        assert!(d < 1.95 * (2.0 / n as f64).sqrt(), "KS {d}");
    }
}
