//! The three quanto call pricers.
//!
//! All of them value the same payoff, q_fix * max(S_f(T) - K, 0) paid in
//! domestic currency, and all Monte Carlo variants price under the foreign
//! risk-neutral measure: the domestic value is
//! Q(0) e^{-rf T} E[ Q^{-1}(T) * payoff ].

use crate::blackscholes::{bs_call, BsQuote};
use crate::copula::KernelCopula;
use crate::error::{Error, Result};
use crate::heston::{simulate_dsw_joint, DswParams, SimGrid};
use crate::marginals::EmpiricalMarginal;
use crate::market::{quanto_payoff, rho_domestic_from_foreign, ContractSpec, MarketConfig};
use crate::math::mean_and_std_error;

/// A price with its Monte Carlo uncertainty. Closed-form prices report a
/// standard error of exactly zero and no samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceResult {
    pub price: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Closed-form desk rule: Black-Scholes on a drift-adjusted spot.
///
/// The adjustment replaces the domestic forward growth with
/// r - rf + rho(S_f, Q) * vol_sf_atm * vol_q_atm, where rho(S_f, Q) is the
/// sign-flipped asset/inverted-FX correlation from the market config. The
/// at-the-money vols drive the drift adjustment; the vol slot of the final
/// Black-Scholes call uses the at-strike asset vol, so a vol smile enters
/// the formula only through that argument.
pub fn price_practitioner(
    mkt: &MarketConfig,
    contract: &ContractSpec,
    vol_sf_atm: f64,
    vol_q_atm: f64,
    vol_sf_strike: f64,
) -> Result<PriceResult> {
    for (name, v) in [
        ("vol_sf_atm", vol_sf_atm),
        ("vol_q_atm", vol_q_atm),
        ("vol_sf_strike", vol_sf_strike),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "{name} must be nonnegative and finite, got {v}"
            )));
        }
    }
    let rho_sq = rho_domestic_from_foreign(mkt.rho_sf_qinv)?;
    let adj = mkt.r - mkt.rf + rho_sq * vol_sf_atm * vol_q_atm;
    let adj_spot = mkt.s0 * (-contract.maturity * adj).exp();
    let quote = BsQuote::new(
        adj_spot,
        contract.strike,
        vol_sf_strike,
        contract.maturity,
        mkt.r,
    )?;
    Ok(PriceResult {
        price: mkt.q_fix * bs_call(&quote),
        std_error: 0.0,
        n_samples: 0,
    })
}

/// Monte Carlo price under the coupled four-factor dynamics.
pub fn price_dsw(
    mkt: &MarketConfig,
    contract: &ContractSpec,
    params: &DswParams,
    grid: &SimGrid,
) -> Result<PriceResult> {
    let pairs = simulate_dsw_joint(mkt.s0, mkt.qinv0(), params, contract.maturity, grid)?;
    price_from_joint_terminals(mkt, contract, &pairs)
}

/// Monte Carlo price that splits the joint law into simulated marginals and
/// an explicit copula: draw dependence from the copula, map each coordinate
/// through its marginal quantile, and average the converted payoff.
pub fn price_copula(
    mkt: &MarketConfig,
    contract: &ContractSpec,
    marginal_sf: &EmpiricalMarginal,
    marginal_qinv: &EmpiricalMarginal,
    copula: &KernelCopula,
    n_draws: usize,
    seed: u64,
) -> Result<PriceResult> {
    let draws = copula.sample(n_draws, seed)?;
    let mut pairs = Vec::with_capacity(draws.len());
    for (v1, v2) in draws {
        pairs.push((marginal_sf.quantile(v1)?, marginal_qinv.quantile(v2)?));
    }
    price_from_joint_terminals(mkt, contract, &pairs)
}

/// Shared discounting step: average Q^{-1}(T) * payoff over joint terminal
/// pairs and convert to domestic present value.
pub fn price_from_joint_terminals(
    mkt: &MarketConfig,
    contract: &ContractSpec,
    pairs: &[(f64, f64)],
) -> Result<PriceResult> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one terminal sample".to_string(),
        ));
    }
    let mut vals = Vec::with_capacity(pairs.len());
    for &(s_t, qinv_t) in pairs {
        if !qinv_t.is_finite() || qinv_t <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "inverted FX terminal must be positive and finite, got {qinv_t}"
            )));
        }
        vals.push(qinv_t * quanto_payoff(s_t, contract.strike, mkt.q_fix)?);
    }
    let disc = mkt.q0 * (-mkt.rf * contract.maturity).exp();
    let (mean, se) = mean_and_std_error(&vals);
    Ok(PriceResult {
        price: disc * mean,
        std_error: disc * se,
        n_samples: vals.len(),
    })
}
