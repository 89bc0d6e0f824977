//! Numerical laboratory for sublinear (G-)expectations.
//!
//! `Ē[ξ] = sup_θ E_θ[ξ]` is realized over piecewise-constant volatility
//! scenarios. The nonlinear semigroup `P̄_T f(x) = Ē f(X_T^x)` of a G-SDE is
//! computed by a monotone PDE solver ([`gheat`]) and by worst-case Monte
//! Carlo ([`simulate`]); [`coupling`], [`harnack`] and [`kernels`] turn the
//! Harnack-type inequalities and their applications into executable checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod gheat;
pub mod harnack;
pub mod kernels;
pub mod model;
pub mod quad;
pub mod rng;
pub mod simulate;

pub use error::{GexpError, Result};
pub use model::{
    make_scenario_lattice, Convexity, Drift, GsdeSpec, McConfig, Scenario, SdeKind, TestFunction, VolatilityBand,
};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
