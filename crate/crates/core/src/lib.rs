//! Monte Carlo toolkit for generalized Kac kinetic equations.
//!
//! The solution of `∂ρ/∂t + ρ = Q⁺(ρ, ρ)` is realized as the law of a
//! randomly weighted sum `V_t = Σ β_j X_j` over the leaves of a Yule
//! branching tree. On top of that representation the crate provides:
//!
//! * collision kernels `(L, R)` with their spectral function
//!   `Q(s) = E[L^s + R^s] − 1` and the large-deviation regime table
//!   ([`kernels`]);
//! * heavy-tailed initial laws with exact tail metadata ([`initial_data`]);
//! * the collision-weight array and its martingale normalization
//!   ([`weights`]);
//! * samplers for `ν_t`, `V_t`, the max-process `H_t` and a Wild-sum oracle
//!   ([`processes`]);
//! * the limit objects: the mixing variable `Z_∞(α)`, stable parameters and
//!   the limit laws of `V_∞` and `H_∞` ([`limits`]);
//! * tail-probability estimators and finite-n deviation bounds
//!   ([`deviations`]);
//! * config-driven, seed-reproducible experiments ([`config`],
//!   [`experiment`]).

pub mod config;
pub mod deviations;
pub mod experiment;
pub mod initial_data;
pub mod kernels;
pub mod limits;
pub mod processes;
pub mod rng;
pub mod stats;
pub mod weights;

mod error;

pub use error::{Error, Result};
pub use initial_data::{InitialLaw, TailProfile};
pub use kernels::{CollisionKernel, Regime, RegimeCase, SpectralReport};
pub use limits::{StableParams, ZPool};
pub use processes::PathSample;
pub use rng::{Parallel, Stream};
pub use weights::{WeightArray, WeightNorm};
