//! Pricing engine for quanto call options: a payoff on a foreign asset,
//! converted to domestic currency at a rate fixed up front.
//!
//! Three pricers are provided, in increasing order of how much dependence
//! structure they capture:
//!
//! * [`pricing::price_practitioner`]: the closed-form desk rule. Black-Scholes
//!   on a drift-adjusted spot, with the adjustment built from at-the-money
//!   implied vols and the asset/FX correlation.
//! * [`pricing::price_dsw`]: Monte Carlo under a four-factor model in which
//!   both the asset and the inverted FX rate follow square-root stochastic
//!   volatility dynamics, coupled through a full correlation structure.
//! * [`pricing::price_copula`]: repricing under an empirical dependence view.
//!   A kernel-smoothed copula estimated from expert scenario data is glued to
//!   simulated marginal distributions, so the dependence assumption can be
//!   swapped without touching the marginals.
//!
//! [`experiments`] wires the three together into reproducible benchmark cases
//! over a strike grid. All simulation is counter-based (see [`rng`]), so every
//! number produced by this crate is a pure function of the seed, independent
//! of thread count.

pub mod blackscholes;
pub mod copula;
pub mod error;
pub mod experiments;
pub mod heston;
pub mod kv;
pub mod market;
pub mod marginals;
pub mod math;
mod parallel;
pub mod pricing;
pub mod rng;

pub use error::{Error, Result};
