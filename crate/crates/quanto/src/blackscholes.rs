//! Black-Scholes call pricing and implied volatility inversion.

use crate::error::{BandBound, Error, Result};
use crate::math::{norm_cdf, norm_pdf};

/// A validated call quote. Construction enforces the domain, so the pricing
/// functions themselves are total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsQuote {
    pub spot: f64,
    pub strike: f64,
    pub vol: f64,
    pub maturity: f64,
    pub rate: f64,
}

impl BsQuote {
    pub fn new(spot: f64, strike: f64, vol: f64, maturity: f64, rate: f64) -> Result<Self> {
        for (name, v) in [
            ("spot", spot),
            ("strike", strike),
            ("vol", vol),
            ("maturity", maturity),
            ("rate", rate),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        if spot <= 0.0 || strike <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "spot and strike must be positive, got spot={spot} strike={strike}"
            )));
        }
        if vol < 0.0 {
            return Err(Error::InvalidInput(format!("vol must be nonnegative, got {vol}")));
        }
        if maturity <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "maturity must be positive, got {maturity}"
            )));
        }
        Ok(BsQuote {
            spot,
            strike,
            vol,
            maturity,
            rate,
        })
    }
}

/// European call value. Zero vol collapses to the discounted forward
/// intrinsic. The result is clamped to the arbitrage band
/// [max(spot - strike * e^{-r T}, 0), spot], which the analytic formula
/// satisfies exactly but floating point can graze.
pub fn bs_call(q: &BsQuote) -> f64 {
    let lower = (q.spot - q.strike * (-q.rate * q.maturity).exp()).max(0.0);
    if q.vol == 0.0 {
        return lower;
    }
    let st = q.vol * q.maturity.sqrt();
    let d1 = ((q.spot / q.strike).ln() + (q.rate + 0.5 * q.vol * q.vol) * q.maturity) / st;
    let d2 = d1 - st;
    let value = q.spot * norm_cdf(d1) - q.strike * (-q.rate * q.maturity).exp() * norm_cdf(d2);
    value.max(lower).min(q.spot)
}

/// Sensitivity of `bs_call` to vol. Zero at vol = 0 by convention.
pub fn bs_vega(q: &BsQuote) -> f64 {
    if q.vol == 0.0 {
        return 0.0;
    }
    let st = q.vol * q.maturity.sqrt();
    let d1 = ((q.spot / q.strike).ln() + (q.rate + 0.5 * q.vol * q.vol) * q.maturity) / st;
    q.spot * q.maturity.sqrt() * norm_pdf(d1)
}

const IV_PRICE_TOL: f64 = 1e-10;
const IV_VOL_LO: f64 = 1e-6;
const IV_VOL_HI: f64 = 5.0;
const IV_VOL_MAX: f64 = 40.0;
const IV_MAX_ITER: usize = 200;

/// Invert `bs_call` in the vol argument. The target must lie strictly inside
/// the arbitrage band; on violation the error names the offending bound.
/// Root search is a bisection bracket with secant acceleration, starting on
/// [1e-6, 5] and doubling the upper end (to at most 40) when the target
/// exceeds the bracket. Converges when the repriced value is within 1e-10,
/// or when the bracket collapses to floating-point resolution.
pub fn bs_implied_vol(
    target_price: f64,
    spot: f64,
    strike: f64,
    maturity: f64,
    rate: f64,
) -> Result<f64> {
    for (name, v) in [
        ("target_price", target_price),
        ("spot", spot),
        ("strike", strike),
        ("maturity", maturity),
        ("rate", rate),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
        }
    }
    if spot <= 0.0 || strike <= 0.0 || maturity <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "need positive spot, strike, maturity; got {spot}, {strike}, {maturity}"
        )));
    }

    let lower = (spot - strike * (-rate * maturity).exp()).max(0.0);
    if target_price <= lower {
        return Err(Error::NoSolution {
            violated: BandBound::LowerIntrinsic,
            message: format!(
                "target price {target_price} is at or below the intrinsic bound {lower}"
            ),
        });
    }
    if target_price >= spot {
        return Err(Error::NoSolution {
            violated: BandBound::UpperSpot,
            message: format!("target price {target_price} is at or above the spot bound {spot}"),
        });
    }

    let price_at = |vol: f64| {
        bs_call(&BsQuote {
            spot,
            strike,
            vol,
            maturity,
            rate,
        })
    };

    let tol = IV_PRICE_TOL;
    let mut lo = IV_VOL_LO;
    let mut f_lo = price_at(lo) - target_price;
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_lo > 0.0 {
        return Err(Error::Convergence(format!(
            "target price {target_price} is below the value at the minimum vol {IV_VOL_LO}"
        )));
    }
    let mut hi = IV_VOL_HI;
    let mut f_hi = price_at(hi) - target_price;
    while f_hi < 0.0 && hi < IV_VOL_MAX {
        hi = (hi * 2.0).min(IV_VOL_MAX);
        f_hi = price_at(hi) - target_price;
    }
    if f_hi < 0.0 {
        return Err(Error::Convergence(format!(
            "target price {target_price} needs vol above {IV_VOL_MAX}"
        )));
    }
    if f_hi.abs() <= tol {
        return Ok(hi);
    }

    // Price is increasing in vol, so [lo, hi] always brackets. Secant steps
    // do the fast local work; whenever one fails to halve the interval the
    // next step bisects, which keeps the worst case geometric. The secant
    // can creep along one endpoint otherwise.
    let mut take_bisect = false;
    for _ in 0..IV_MAX_ITER {
        let width = hi - lo;
        if width <= f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
        let mut mid = if take_bisect {
            0.5 * (lo + hi)
        } else {
            lo - f_lo * width / (f_hi - f_lo)
        };
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let f_mid = price_at(mid) - target_price;
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        take_bisect = !take_bisect && (hi - lo) > 0.5 * width;
    }
    Err(Error::Convergence(format!(
        "implied vol iteration stalled at [{lo}, {hi}] for target {target_price}"
    )))
}
