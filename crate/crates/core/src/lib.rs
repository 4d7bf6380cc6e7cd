//! Bayesian Nash equilibria of a platform/user information-disclosure game.
//!
//! A user with private preference `θ ∈ [0,1]` sends one of `n` cheap-talk
//! messages to a platform. The platform observes two independent sources
//! `X₁, X₂` and may forward only one of them. The user then estimates both
//! and pays `θ(x₁ − x̂₁)² + (1 − θ)(x₂ − x̂₂)²`.
//!
//! In equilibrium the platform follows a weighted-quadratic disclosure rule
//! (one weight per message), the user partitions `[0,1]` into `n` ordered
//! cells, and the estimator passes the forwarded value through while
//! replacing the other source by its prior mean. This crate computes those
//! equilibria and the quantities needed to check them:
//!
//! - [`distributions`]: content densities and the preference prior.
//! - [`kernels`]: the expected-loss kernels `H(w)`, `G(w)` and their derivatives.
//! - [`policies`]: executable disclosure, message and estimation rules.
//! - [`equilibrium`]: the fixed-point solver, planner loss and oracle checks.
//! - [`montecarlo`]: seeded simulation of the full game.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(a < b)` is how NaN inputs get rejected alongside bad orderings.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod distributions;
pub mod equilibrium;
mod error;
pub mod kernels;
pub mod montecarlo;
pub mod policies;
pub mod quad;
pub mod special;

pub use distributions::{DensityFamily, GameSpec, PreferencePrior, SymmetricDensity};

pub use error::{Error, Result};
pub use kernels::{KernelCache, KernelValues};

pub use equilibrium::{Equilibrium, SolverConfig};
pub use policies::{MppdPolicy, Source, WqdPolicy};
