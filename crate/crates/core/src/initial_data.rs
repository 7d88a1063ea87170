//! Initial laws in the domain of normal attraction of an α-stable law.
//!
//! For a law `F_0` with `P{|X|>x} = c_0 x^{-α}(1 + R(x))` the deviation
//! bounds need `c_0`, the remainder `R`, a non-increasing envelope
//! `R̄(x) ≥ sup_{y≥x} |R(y)|`, `K_0 = c_0(‖R‖_∞ + 1)` and the constant `K_1`.
//! Catalog laws carry all of these exactly; user laws must declare them.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::rng::open_unit;
use crate::{Error, Result};

type Sampler = Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;
type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A law supplied by the caller together with its tail constants.
#[derive(Clone)]
pub struct UserLaw {
    pub alpha: f64,
    pub c0_plus: f64,
    pub c0_minus: f64,
    /// Limit of the truncated means (`α = 1` only).
    pub gamma0: f64,
    /// `sup_R |∫_{(−R,R)} y dF_0 − γ_0|` (`α = 1` only).
    pub truncated_mean_gap: f64,
    /// Declared `E[X] = 0`; required when `α > 1`.
    pub centered: bool,
    pub sampler: Sampler,
    /// `x ↦ P{|X| > x}`.
    pub tail: RealFn,
    /// `x ↦ R̄(x)`; without it no [`TailProfile`] can be built.
    pub envelope: Option<RealFn>,
    /// `‖R‖_∞`; defaults to `envelope(0+)` when absent.
    pub remainder_sup: Option<f64>,
}

impl fmt::Debug for UserLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserLaw")
            .field("alpha", &self.alpha)
            .field("c0_plus", &self.c0_plus)
            .field("c0_minus", &self.c0_minus)
            .field("gamma0", &self.gamma0)
            .field("centered", &self.centered)
            .field("has_envelope", &self.envelope.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum LawKind {
    /// `±xmin·U^{-1/α}` with a fair sign.
    SymmetricPareto { xmin: f64 },
    /// `s·Y − shift`, `Y` Pareto(α, xmin), `P{s = +1} = p_plus`; the shift
    /// centers the law when `α > 1` and is zero otherwise.
    AsymmetricPareto { xmin: f64, p_plus: f64, shift: f64 },
    User(UserLaw),
}

#[derive(Clone, Debug)]
pub struct InitialLaw {
    alpha: f64,
    c0_plus: f64,
    c0_minus: f64,
    gamma0: f64,
    kind: LawKind,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidLaw(format!("alpha must lie in (0,2), got {alpha}")))
    }
}

impl InitialLaw {
    pub fn symmetric_pareto(alpha: f64, xmin: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(xmin > 0.0 && xmin.is_finite()) {
            return Err(Error::InvalidLaw(format!("xmin must be positive, got {xmin}")));
        }
        let half = 0.5 * xmin.powf(alpha);
        Ok(Self {
            alpha,
            c0_plus: half,
            c0_minus: half,
            gamma0: 0.0,
            kind: LawKind::SymmetricPareto { xmin },
        })
    }

    /// Sign-flipped Pareto with tail constants `c_plus`, `c_minus`; the
    /// magnitude has `xmin = (c_plus + c_minus)^{1/α}`. For `α > 1` a
    /// constant is subtracted so that the mean is exactly zero.
    pub fn asymmetric_pareto(alpha: f64, c_plus: f64, c_minus: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(c_plus >= 0.0 && c_minus >= 0.0 && c_plus.is_finite() && c_minus.is_finite()) {
            return Err(Error::InvalidLaw(format!(
                "tail constants must be finite and non-negative, got ({c_plus}, {c_minus})"
            )));
        }
        let c0 = c_plus + c_minus;
        if c0 <= 0.0 {
            return Err(Error::InvalidLaw("c0+ + c0- must be positive".into()));
        }
        if alpha == 1.0 && c_plus != c_minus {
            return Err(Error::InvalidLaw(
                "alpha = 1 requires c0+ = c0- (symmetric tails)".into(),
            ));
        }
        let xmin = c0.powf(1.0 / alpha);
        let p_plus = c_plus / c0;
        let shift = if alpha > 1.0 {
            (2.0 * p_plus - 1.0) * xmin * alpha / (alpha - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            alpha,
            c0_plus: c_plus,
            c0_minus: c_minus,
            gamma0: 0.0,
            kind: LawKind::AsymmetricPareto { xmin, p_plus, shift },
        })
    }

    pub fn user(law: UserLaw) -> Result<Self> {
        check_alpha(law.alpha)?;
        if !(law.c0_plus >= 0.0 && law.c0_minus >= 0.0 && law.c0_plus + law.c0_minus > 0.0) {
            return Err(Error::InvalidLaw("need c0+, c0- >= 0 with c0+ + c0- > 0".into()));
        }
        if law.alpha == 1.0 {
            if law.c0_plus != law.c0_minus {
                return Err(Error::InvalidLaw("alpha = 1 requires c0+ = c0-".into()));
            }
            if !law.gamma0.is_finite() || !law.truncated_mean_gap.is_finite() {
                return Err(Error::InvalidLaw("alpha = 1 requires a finite gamma0".into()));
            }
        }
        if law.alpha > 1.0 && !law.centered {
            return Err(Error::InvalidLaw("alpha > 1 requires a centered law".into()));
        }
        Ok(Self {
            alpha: law.alpha,
            c0_plus: law.c0_plus,
            c0_minus: law.c0_minus,
            gamma0: law.gamma0,
            kind: LawKind::User(law),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c0_plus(&self) -> f64 {
        self.c0_plus
    }

    pub fn c0_minus(&self) -> f64 {
        self.c0_minus
    }

    /// `c_0 = c_0^+ + c_0^-`.
    pub fn c0(&self) -> f64 {
        self.c0_plus + self.c0_minus
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// Whether the law has mean zero (always true for `α > 1`).
    pub fn centered(&self) -> bool {
        match &self.kind {
            LawKind::SymmetricPareto { .. } => self.alpha > 1.0,
            LawKind::AsymmetricPareto { .. } => self.alpha > 1.0,
            LawKind::User(u) => u.centered,
        }
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            LawKind::SymmetricPareto { xmin } => {
                let bits = rng.next_u64();
                let u = ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
                let mag = xmin * u.powf(-1.0 / self.alpha);
                if bits & 1 == 0 {
                    mag
                } else {
                    -mag
                }
            }
            LawKind::AsymmetricPareto { xmin, p_plus, shift } => {
                let sign = if rng.random::<f64>() < *p_plus { 1.0 } else { -1.0 };
                sign * xmin * open_unit(rng).powf(-1.0 / self.alpha) - shift
            }
            LawKind::User(u) => (u.sampler)(rng),
        }
    }

    /// `P{|X| > x}` (exact for catalog laws).
    pub fn tail_prob(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match &self.kind {
            LawKind::SymmetricPareto { xmin } => pareto_survival(x, *xmin, self.alpha),
            LawKind::AsymmetricPareto { xmin, p_plus, shift } => {
                let g = |y: f64| pareto_survival(y, *xmin, self.alpha);
                let (p, m) = (*p_plus, *shift);
                // X = sY − m; P{X > x} + P{X < −x}
                let up = p * g(x + m) + (1.0 - p) * (1.0 - g(-(x + m)));
                let down = p * (1.0 - g(m - x)) + (1.0 - p) * g(x - m);
                (up + down).clamp(0.0, 1.0)
            }
            LawKind::User(u) => (u.tail)(x),
        }
    }

    /// `R(x) = x^α P{|X|>x}/c_0 − 1`.
    pub fn tail_remainder(&self, x: f64) -> f64 {
        x.powf(self.alpha) * self.tail_prob(x) / self.c0() - 1.0
    }

    pub fn tail_profile(&self) -> Result<TailProfile> {
        let alpha = self.alpha;
        let c0 = self.c0();
        let (envelope, r_sup) = match &self.kind {
            LawKind::SymmetricPareto { xmin } => (Envelope::Pareto { xmin: *xmin, alpha }, 1.0),
            LawKind::AsymmetricPareto { xmin, shift, .. } => {
                let table = BracketEnvelope::build(self, *xmin, shift.abs());
                let sup = table.eval(0.0);
                (Envelope::Bracket(Arc::new(table)), sup)
            }
            LawKind::User(u) => {
                let env = u.envelope.clone().ok_or_else(|| {
                    Error::Unsupported("user law without a remainder envelope".into())
                })?;
                let sup = u.remainder_sup.unwrap_or_else(|| env(f64::MIN_POSITIVE));
                (Envelope::User(env), sup)
            }
        };
        let k0 = c0 * (r_sup + 1.0);
        let k1 = if alpha < 1.0 {
            k0 * k0 / ((1.0 - alpha) * (1.0 - alpha))
        } else if alpha > 1.0 {
            k0 * k0 * alpha * alpha / ((1.0 - alpha) * (1.0 - alpha))
        } else {
            let gap = match &self.kind {
                LawKind::User(u) => u.truncated_mean_gap.abs(),
                _ => 0.0,
            };
            let g = self.gamma0.abs() + gap;
            g * g
        };
        Ok(TailProfile {
            alpha,
            c0,
            k0,
            k1,
            remainder_sup: r_sup,
            envelope,
        })
    }
}

fn pareto_survival(y: f64, xmin: f64, alpha: f64) -> f64 {
    if y < xmin {
        1.0
    } else {
        (y / xmin).powf(-alpha)
    }
}

/// Draw from `F_0`.
pub fn sample_initial<R: Rng>(law: &InitialLaw, rng: &mut R) -> f64 {
    law.sample(rng)
}

pub fn tail_profile(law: &InitialLaw) -> Result<TailProfile> {
    law.tail_profile()
}

pub fn tail_remainder(law: &InitialLaw, x: f64) -> f64 {
    law.tail_remainder(x)
}

#[derive(Clone)]
enum Envelope {
    Pareto { xmin: f64, alpha: f64 },
    Bracket(Arc<BracketEnvelope>),
    User(RealFn),
}

/// Tail constants of an initial law.
#[derive(Clone)]
pub struct TailProfile {
    pub alpha: f64,
    pub c0: f64,
    /// `K_0 = c_0 (‖R‖_∞ + 1)`.
    pub k0: f64,
    pub k1: f64,
    /// `‖R‖_∞` (an upper bound for laws whose envelope is tabulated).
    pub remainder_sup: f64,
    envelope: Envelope,
}

impl fmt::Debug for TailProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailProfile")
            .field("alpha", &self.alpha)
            .field("c0", &self.c0)
            .field("k0", &self.k0)
            .field("k1", &self.k1)
            .field("remainder_sup", &self.remainder_sup)
            .finish()
    }
}

impl TailProfile {
    /// `R̄(x)`, non-increasing and `≥ |R(y)|` for every `y ≥ x`.
    /// `R̄(+∞) = 0`, which also covers the `x/0` convention.
    pub fn envelope(&self, x: f64) -> f64 {
        if x.is_infinite() && x > 0.0 {
            return 0.0;
        }
        match &self.envelope {
            Envelope::Pareto { xmin, alpha } => {
                if x >= *xmin {
                    0.0
                } else if x <= 0.0 {
                    1.0
                } else {
                    1.0 - (x / xmin).powf(*alpha)
                }
            }
            Envelope::Bracket(t) => t.eval(x),
            Envelope::User(f) => f(x),
        }
    }
}

/// Rigorous envelope for the shifted asymmetric Pareto law.
///
/// On a geometric grid `y_0 < … < y_K` the monotonicity of `y^α` and of
/// `P{|X|>y}` gives, for `y ∈ [y_k, y_{k+1}]`,
/// `y_k^α P(y_{k+1}) ≤ y^α P(y) ≤ y_{k+1}^α P(y_k)`, hence a bound on `|R|`
/// per bracket. Beyond `y_K = |m| + xmin` both branches are pure Pareto and
/// the mean value theorem gives `|R(y)| ≤ α u (1−u)^{−α−1}`, `u = |m|/y`.
struct BracketEnvelope {
    grid: Vec<f64>,
    suffix_max: Vec<f64>,
    alpha: f64,
    shift: f64,
    tail_start: f64,
}

impl BracketEnvelope {
    const RATIO: f64 = 1.000_5;

    fn build(law: &InitialLaw, xmin: f64, shift: f64) -> Self {
        let alpha = law.alpha;
        let c0 = law.c0();
        let lo = 1e-6 * xmin;
        let hi = shift + xmin;
        let mut grid = vec![lo];
        while *grid.last().unwrap() < hi {
            let next = (grid.last().unwrap() * Self::RATIO).min(hi);
            grid.push(next);
        }
        let mut bounds: Vec<f64> = grid
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let upper = b.powf(alpha) * law.tail_prob(a) / c0 - 1.0;
                let lower = a.powf(alpha) * law.tail_prob(b) / c0 - 1.0;
                upper.abs().max(lower.abs())
            })
            .collect();
        for k in (0..bounds.len().saturating_sub(1)).rev() {
            bounds[k] = bounds[k].max(bounds[k + 1]);
        }
        let mut env = Self {
            grid,
            suffix_max: bounds,
            alpha,
            shift,
            tail_start: hi,
        };
        let tail_at_start = env.tail_bound(hi);
        for b in &mut env.suffix_max {
            *b = b.max(tail_at_start);
        }
        env
    }

    fn tail_bound(&self, y: f64) -> f64 {
        if self.shift == 0.0 {
            return 0.0;
        }
        let u = self.shift / y;
        self.alpha * u * (1.0 - u).powf(-self.alpha - 1.0)
    }

    fn eval(&self, x: f64) -> f64 {
        if x >= self.tail_start {
            return self.tail_bound(x);
        }
        if x < self.grid[0] {
            return self.suffix_max.first().copied().unwrap_or(0.0).max(1.0);
        }
        let k = self.grid.partition_point(|&y| y <= x).saturating_sub(1);
        self.suffix_max[k.min(self.suffix_max.len() - 1)]
    }
}
