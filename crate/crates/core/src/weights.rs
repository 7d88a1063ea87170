//! Collision weights `β_{j,n}` of the branching representation.
//!
//! The array starts at `β_{1,1} = 1`; growth step `k` picks a uniform
//! index `I_k ∈ {1..k}` and replaces `β_{I_k}` by the pair
//! `(L_k β_{I_k}, R_k β_{I_k})`. The `α`-sums `M_n(α) = Σ_j β_{j,n}^α` are
//! updated incrementally, and `m_n(α) = E[M_n(α)]` makes
//! `M̃_n(α) = M_n(α)/m_n(α)` a mean-one martingale.

use rand::Rng;

use crate::kernels::CollisionKernel;
use crate::{Error, Result};

#[inline]
fn pow0(v: f64, a: f64) -> f64 {
    if v > 0.0 {
        if a == 1.0 {
            v
        } else {
            v.powf(a)
        }
    } else {
        0.0
    }
}

/// Weights `β_{1,n}, …, β_{n,n}` with running `α`-sums.
///
/// Entries are kept in a flat vector: child one overwrites the parent in
/// place and child two is appended. Every statistic used downstream is a
/// symmetric function of the entries, so their order carries no meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightArray {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    sums: Vec<f64>,
}

impl WeightArray {
    /// The one-leaf array `[1]` tracking the given exponents.
    pub fn new(alphas: &[f64]) -> Self {
        Self {
            betas: vec![1.0],
            alphas: alphas.to_vec(),
            sums: vec![1.0; alphas.len()],
        }
    }

    /// Reset to `[1]` keeping allocations.
    pub fn reset(&mut self) {
        self.betas.clear();
        self.betas.push(1.0);
        self.sums.iter_mut().for_each(|s| *s = 1.0);
    }

    pub fn n(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `β_(n) = max_j β_{j,n}`.
    pub fn beta_max(&self) -> f64 {
        self.betas.iter().copied().fold(0.0, f64::max)
    }

    /// `M_n(α)` for a tracked exponent.
    pub fn m_sum(&self, alpha: f64) -> Option<f64> {
        self.alphas
            .iter()
            .position(|&a| a == alpha)
            .map(|i| self.sums[i])
    }

    /// `Σ β_j^α` recomputed from scratch.
    pub fn recompute_sum(&self, alpha: f64) -> f64 {
        self.betas.iter().map(|&b| pow0(b, alpha)).sum()
    }

    /// One growth step `n → n+1`. Returns `(index, L, R)` of the split.
    #[inline]
    pub fn grow_step<R: Rng>(&mut self, kernel: &CollisionKernel, rng: &mut R) -> (usize, f64, f64) {
        let n = self.betas.len();
        let i = if n == 1 { 0 } else { rng.random_range(0..n) };
        let (l, r) = kernel.sample(rng);
        let parent = self.betas[i];
        for (sum, &a) in self.sums.iter_mut().zip(&self.alphas) {
            *sum += pow0(parent, a) * (pow0(l, a) + pow0(r, a) - 1.0);
        }
        self.betas[i] = l * parent;
        self.betas.push(r * parent);
        (i, l, r)
    }

    /// Grow until the array has `n` entries.
    pub fn grow_to<R: Rng>(&mut self, kernel: &CollisionKernel, n: usize, rng: &mut R) {
        self.betas.reserve(n.saturating_sub(self.betas.len()));
        while self.betas.len() < n {
            self.grow_step(kernel, rng);
        }
    }
}

/// Build `β_{·,n}` from scratch, tracking `Σ β^α` for each of `alphas`.
pub fn grow_weights<R: Rng>(
    kernel: &CollisionKernel,
    n: usize,
    alphas: &[f64],
    rng: &mut R,
) -> Result<WeightArray> {
    if n == 0 {
        return Err(Error::InvalidArgument("weight array needs n >= 1".into()));
    }
    let mut w = WeightArray::new(alphas);
    w.grow_to(kernel, n, rng);
    Ok(w)
}

/// `m_n(α) = Γ(n+S)/(Γ(n)Γ(S+1))` for `S = S(α)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightNorm {
    pub s_alpha: f64,
    pub n: usize,
    pub m: f64,
    pub log_m: f64,
}

fn check_s(s_alpha: f64) -> Result<()> {
    if s_alpha.is_finite() && s_alpha > -1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("m_n needs S(alpha) > -1, got {s_alpha}")))
    }
}

/// `m_n` via `m_{k+1} = m_k (1 + S/k)` summed in log space with
/// compensated summation.
pub fn mean_weight_norm(s_alpha: f64, n: usize) -> Result<WeightNorm> {
    check_s(s_alpha)?;
    if n == 0 {
        return Err(Error::InvalidArgument("m_n needs n >= 1".into()));
    }
    let mut table = NormTable::new(s_alpha)?;
    let log_m = table.log_m(n);
    Ok(WeightNorm {
        s_alpha,
        n,
        m: log_m.exp(),
        log_m,
    })
}

/// Lazily extended table of `ln m_n` for one `S`.
#[derive(Clone, Debug)]
pub struct NormTable {
    s_alpha: f64,
    log_m: Vec<f64>,
    sum: f64,
    compensation: f64,
}

impl NormTable {
    pub fn new(s_alpha: f64) -> Result<Self> {
        check_s(s_alpha)?;
        Ok(Self {
            s_alpha,
            // index 0 unused, ln m_1 = 0
            log_m: vec![0.0, 0.0],
            sum: 0.0,
            compensation: 0.0,
        })
    }

    pub fn s_alpha(&self) -> f64 {
        self.s_alpha
    }

    pub fn log_m(&mut self, n: usize) -> f64 {
        while self.log_m.len() <= n {
            let k = (self.log_m.len() - 1) as f64;
            let term = (self.s_alpha / k).ln_1p();
            // Neumaier summation
            let t = self.sum + term;
            if self.sum.abs() >= term.abs() {
                self.compensation += (self.sum - t) + term;
            } else {
                self.compensation += (term - t) + self.sum;
            }
            self.sum = t;
            self.log_m.push(self.sum + self.compensation);
        }
        self.log_m[n]
    }

    pub fn m(&mut self, n: usize) -> f64 {
        self.log_m(n).exp()
    }
}

/// `M̃_n(α) = M_n(α)/m_n(α)`; `alpha` must be tracked by `w`.
pub fn tilde_m(w: &WeightArray, alpha: f64, s_alpha: f64) -> Result<f64> {
    let m_sum = w
        .m_sum(alpha)
        .ok_or_else(|| Error::InvalidArgument(format!("alpha {alpha} not tracked")))?;
    let norm = mean_weight_norm(s_alpha, w.n())?;
    Ok(m_sum / norm.m)
}
