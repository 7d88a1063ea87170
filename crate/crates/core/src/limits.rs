//! Limit objects of the rescaled processes.
//!
//! `Z_∞(α)` is the mean-one solution of `Z = Θ^{S(α)}(L^α Z_1 + R^α Z_2)`;
//! it mixes the stable limit of `e^{-μ(α)t} V_t` and the Fréchet limit of
//! `e^{-μ(α)t} H_t`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use statrs::function::gamma::gamma;

use crate::kernels::CollisionKernel;
use crate::rng::{open_unit, Parallel};
use crate::weights::WeightArray;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    FixedPoint { iterations: usize },
    Tree { t: f64 },
    Given,
}

/// Empirical population approximating the law of `Z_∞(α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZPool {
    pub samples: Vec<f64>,
    pub alpha: f64,
    pub s_alpha: f64,
    pub provenance: Provenance,
}

impl ZPool {
    /// `size` copies of 1 (mean one, the default starting pool).
    pub fn ones(size: usize, alpha: f64, s_alpha: f64) -> Self {
        Self::from_samples(vec![1.0; size], alpha, s_alpha)
    }

    pub fn from_samples(samples: Vec<f64>, alpha: f64, s_alpha: f64) -> Self {
        Self {
            samples,
            alpha,
            s_alpha,
            provenance: Provenance::Given,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Two-pass population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|z| (z - m) * (z - m)).sum::<f64>() / self.samples.len() as f64
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.samples.len() as f64).sqrt()
    }

    /// Sample `E[Z^p]`.
    pub fn moment(&self, p: f64) -> f64 {
        self.samples.iter().map(|z| z.powf(p)).sum::<f64>() / self.samples.len() as f64
    }

    /// Uniform draw from the pool.
    #[inline]
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.samples[rng.random_range(0..self.samples.len())]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z")?;
        for z in &self.samples {
            writeln!(out, "{z}")?;
        }
        Ok(())
    }

    /// Little-endian `f64` values, no header.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for z in &self.samples {
            out.write_all(&z.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8], alpha: f64, s_alpha: f64) -> Result<Self> {
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidArgument("binary pool length not a multiple of 8".into()));
        }
        let samples = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::from_samples(samples, alpha, s_alpha))
    }
}

/// One population-dynamics sweep per iteration: every new member is
/// `Θ^{S(α)}(L^α Z_1 + R^α Z_2)` with `Z_1, Z_2` resampled from the
/// previous pool. When `S(α) = 0` no uniform is drawn for `Θ`.
pub fn zpool_iterate<R: Rng>(
    pool: &ZPool,
    kernel: &CollisionKernel,
    rng: &mut R,
    iterations: usize,
) -> Result<ZPool> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if !(pool.s_alpha > -1.0) {
        return Err(Error::Domain(format!("S(alpha) = {} must exceed -1", pool.s_alpha)));
    }
    let (alpha, s) = (pool.alpha, pool.s_alpha);
    let mut current = pool.samples.clone();
    let mut next = vec![0.0; current.len()];
    let size = current.len();
    for _ in 0..iterations {
        for z in next.iter_mut() {
            let theta = if s == 0.0 { 1.0 } else { open_unit(rng).powf(s) };
            let (l, r) = kernel.sample(rng);
            let z1 = current[rng.random_range(0..size)];
            let z2 = current[rng.random_range(0..size)];
            *z = theta * (pow0(l, alpha) * z1 + pow0(r, alpha) * z2);
        }
        std::mem::swap(&mut current, &mut next);
    }
    let prior = match pool.provenance {
        Provenance::FixedPoint { iterations } => iterations,
        _ => 0,
    };
    Ok(ZPool {
        samples: current,
        alpha,
        s_alpha: s,
        provenance: Provenance::FixedPoint {
            iterations: prior + iterations,
        },
    })
}

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

/// Pool of `e^{-S(α)t} M_{ν_t}(α)` draws from independent trees.
pub fn zpool_from_trees<R: Rng>(
    kernel: &CollisionKernel,
    alpha: f64,
    s_alpha: f64,
    t: f64,
    size: usize,
    rng: &mut R,
) -> ZPool {
    let scale = (-s_alpha * t).exp();
    let mut w = WeightArray::new(&[alpha]);
    let samples = (0..size)
        .map(|_| {
            let n = crate::processes::sample_yule(t, rng);
            w.reset();
            w.grow_to(kernel, n, rng);
            scale * w.m_sum(alpha).unwrap()
        })
        .collect();
    ZPool {
        samples,
        alpha,
        s_alpha,
        provenance: Provenance::Tree { t },
    }
}

/// [`zpool_from_trees`] split over seeded chunks.
pub fn zpool_from_trees_par(
    kernel: &CollisionKernel,
    alpha: f64,
    s_alpha: f64,
    t: f64,
    size: usize,
    par: &Parallel,
) -> ZPool {
    let samples = par
        .map_chunks("zpool-tree", size, |rng, len| {
            zpool_from_trees(kernel, alpha, s_alpha, t, len, rng).samples
        })
        .concat();
    ZPool {
        samples,
        alpha,
        s_alpha,
        provenance: Provenance::Tree { t },
    }
}

/// Parameters of the stable factor of `V_∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    /// `λ = c_0 π / (2 Γ(α) sin(πα/2))` (`α ≠ 1`).
    pub lambda: f64,
    /// `η = (c^+ − c^−)/(c^+ + c^−)`.
    pub eta_skew: f64,
    /// Location factor `γ_0` (`α = 1`).
    pub gamma0: f64,
    /// Cauchy scale `c_0^+ π` (`α = 1`).
    pub cauchy_scale: f64,
}

pub fn stable_params(c0_plus: f64, c0_minus: f64, alpha: f64, gamma0: f64) -> Result<StableParams> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,2), got {alpha}")));
    }
    if !(c0_plus >= 0.0 && c0_minus >= 0.0 && c0_plus + c0_minus > 0.0) {
        return Err(Error::InvalidArgument("need c0+, c0- >= 0 with c0+ + c0- > 0".into()));
    }
    let c0 = c0_plus + c0_minus;
    let eta_skew = (c0_plus - c0_minus) / c0;
    if alpha == 1.0 {
        if c0_plus != c0_minus {
            return Err(Error::InvalidArgument(
                "alpha = 1 requires c0+ = c0-".into(),
            ));
        }
        return Ok(StableParams {
            alpha,
            lambda: c0_plus * PI,
            eta_skew,
            gamma0,
            cauchy_scale: c0_plus * PI,
        });
    }
    Ok(StableParams {
        alpha,
        lambda: c0 * PI / (2.0 * gamma(alpha) * (PI * alpha / 2.0).sin()),
        eta_skew,
        gamma0: 0.0,
        cauchy_scale: 0.0,
    })
}

/// Chambers–Mallows–Stuck draw with characteristic function
/// `exp(−λ|ξ|^α (1 − iη tan(πα/2) sign ξ))`, `α ≠ 1`.
///
/// This is the classical CMS form for scale `σ = λ^{1/α}` and skewness `η`.
pub fn sample_stable<R: Rng>(params: &StableParams, rng: &mut R) -> f64 {
    let a = params.alpha;
    let beta = params.eta_skew;
    let v = PI * (open_unit(rng) - 0.5);
    let w = -open_unit(rng).ln();
    let scale = params.lambda.powf(1.0 / a);
    if beta == 0.0 {
        let x = (a * v).sin() / v.cos().powf(1.0 / a)
            * ((v * (1.0 - a)).cos() / w).powf((1.0 - a) / a);
        return scale * x;
    }
    let bt = beta * (FRAC_PI_2 * a).tan();
    let b = bt.atan() / a;
    let s = (1.0 + bt * bt).powf(1.0 / (2.0 * a));
    let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a)
        * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
    scale * x
}

/// `Z^{1/α} S_α` for `α ≠ 1`; `Z (γ_0 + C)` with `C` Cauchy of scale
/// `c_0^+ π` for `α = 1`.
pub fn sample_v_infinity<R: Rng>(pool: &ZPool, params: &StableParams, rng: &mut R) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let z = pool.draw(rng);
    if params.alpha == 1.0 {
        let c = params.cauchy_scale * (PI * (open_unit(rng) - 0.5)).tan();
        return Ok(z * (params.gamma0 + c));
    }
    Ok(z.powf(1.0 / params.alpha) * sample_stable(params, rng))
}

/// Pool average of the mixed stable characteristic function.
pub fn cf_v_infinity(xi: f64, pool: &ZPool, params: &StableParams) -> Complex64 {
    if pool.is_empty() {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    let n = pool.len() as f64;
    if params.alpha == 1.0 {
        let e = Complex64::new(-params.cauchy_scale * xi.abs(), params.gamma0 * xi);
        return pool.samples.iter().map(|&z| (e * z).exp()).sum::<Complex64>() / n;
    }
    let skew = params.eta_skew * (FRAC_PI_2 * params.alpha).tan() * xi.signum();
    let base = xi.abs().powf(params.alpha) * params.lambda;
    let e = Complex64::new(-base, base * skew);
    pool.samples.iter().map(|&z| (e * z).exp()).sum::<Complex64>() / n
}

/// `P{H_∞ ≤ x}`: pool average of `exp(−c_0 x^{−α} Z)` for `x > 0`, the
/// fraction of zeros at `x = 0`, and `0` for `x < 0`.
pub fn cdf_h_infinity(x: f64, pool: &ZPool, c0: f64, alpha: f64) -> f64 {
    if pool.is_empty() || x < 0.0 {
        return 0.0;
    }
    let n = pool.len() as f64;
    if x == 0.0 {
        return pool.samples.iter().filter(|&&z| z == 0.0).count() as f64 / n;
    }
    let k = c0 * x.powf(-alpha);
    pool.samples.iter().map(|&z| (-k * z).exp()).sum::<f64>() / n
}
