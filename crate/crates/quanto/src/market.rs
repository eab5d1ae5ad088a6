//! Market environment: the quanto payoff, the config shared by every pricer,
//! and square-root stochastic volatility parameter sets.

use crate::error::{Error, Result};
use crate::kv;

/// Everything about the two-economy market that is not model-specific.
///
/// The FX rate is carried in inverted form: `rho_sf_qinv` is the correlation
/// between the foreign asset and Q^-1 (foreign units per domestic), and `q0`
/// is the spot rate quoted as domestic per foreign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    /// Correlation between asset returns and inverted-FX returns, in [-1, 1].
    pub rho_sf_qinv: f64,
    /// Spot FX, domestic currency per unit of foreign currency. Positive.
    pub q0: f64,
    /// Foreign asset spot in foreign currency. Positive.
    pub s0: f64,
    /// Domestic risk-free rate, continuously compounded.
    pub r: f64,
    /// Foreign risk-free rate, continuously compounded.
    pub rf: f64,
    /// Contractual conversion rate fixed at inception. Positive.
    pub q_fix: f64,
}

const CONFIG_KEYS: [&str; 6] = ["rho_sf_qinv", "q0", "s0", "r", "rf", "q_fix"];

impl MarketConfig {
    pub fn new(
        rho_sf_qinv: f64,
        q0: f64,
        s0: f64,
        r: f64,
        rf: f64,
        q_fix: f64,
    ) -> Result<Self> {
        let cfg = MarketConfig {
            rho_sf_qinv,
            q0,
            s0,
            r,
            rf,
            q_fix,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho_sf_qinv", self.rho_sf_qinv),
            ("q0", self.q0),
            ("s0", self.s0),
            ("r", self.r),
            ("rf", self.rf),
            ("q_fix", self.q_fix),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        if self.rho_sf_qinv.abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "rho_sf_qinv must lie in [-1, 1], got {}",
                self.rho_sf_qinv
            )));
        }
        for (name, v) in [("q0", self.q0), ("s0", self.s0), ("q_fix", self.q_fix)] {
            if v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Spot of the inverted FX rate, foreign per domestic.
    pub fn qinv0(&self) -> f64 {
        1.0 / self.q0
    }

    /// Parse from the flat `key = value` format. Exactly the keys
    /// `rho_sf_qinv, q0, s0, r, rf, q_fix` must appear; unknown keys are
    /// rejected and the error for missing keys names all of them at once.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = kv::parse(text)?;
        let mut vals = [None::<f64>; 6];
        for (k, v) in &pairs {
            let Some(slot) = CONFIG_KEYS.iter().position(|name| name == k) else {
                return Err(Error::Config(format!("unknown key `{k}`")));
            };
            let parsed: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("key `{k}`: cannot parse `{v}` as a number")))?;
            if !parsed.is_finite() {
                return Err(Error::Config(format!("key `{k}`: value `{v}` is not finite")));
            }
            vals[slot] = Some(parsed);
        }
        let missing: Vec<&str> = CONFIG_KEYS
            .iter()
            .zip(&vals)
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing keys: {}", missing.join(", "))));
        }
        MarketConfig::new(
            vals[0].unwrap(),
            vals[1].unwrap(),
            vals[2].unwrap(),
            vals[3].unwrap(),
            vals[4].unwrap(),
            vals[5].unwrap(),
        )
    }

    pub fn from_kv_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_str(&text)
    }

    /// Render in the same format `from_kv_str` accepts.
    pub fn to_kv_string(&self) -> String {
        let pairs = vec![
            ("rho_sf_qinv".to_string(), format!("{}", self.rho_sf_qinv)),
            ("q0".to_string(), format!("{}", self.q0)),
            ("s0".to_string(), format!("{}", self.s0)),
            ("r".to_string(), format!("{}", self.r)),
            ("rf".to_string(), format!("{}", self.rf)),
            ("q_fix".to_string(), format!("{}", self.q_fix)),
        ];
        kv::render(&pairs)
    }
}

/// Square-root stochastic volatility parameters for one asset:
/// dV = kappa (v_bar - V) dt + eta sqrt(V) dW, with `rho` the correlation
/// between the asset's return shocks and its variance shocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub rho: f64,
    pub kappa: f64,
    pub v_bar: f64,
    pub v0: f64,
    pub eta: f64,
}

impl HestonParams {
    pub fn new(rho: f64, kappa: f64, v_bar: f64, v0: f64, eta: f64) -> Result<Self> {
        let p = HestonParams {
            rho,
            kappa,
            v_bar,
            v0,
            eta,
        };
        for (name, v) in [
            ("rho", p.rho),
            ("kappa", p.kappa),
            ("v_bar", p.v_bar),
            ("v0", p.v0),
            ("eta", p.eta),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        if p.rho.abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "rho must lie in [-1, 1], got {}",
                p.rho
            )));
        }
        for (name, v) in [
            ("kappa", p.kappa),
            ("v_bar", p.v_bar),
            ("v0", p.v0),
            ("eta", p.eta),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(p)
    }

    /// Order: (rho, kappa, v_bar, v0, eta).
    pub fn from_array(a: [f64; 5]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Zero vol-of-vol and flat variance: the asset degenerates to geometric
    /// Brownian motion with variance `v0`.
    pub fn is_constant_vol(&self) -> bool {
        self.eta == 0.0 && self.v_bar == self.v0
    }
}

/// One option contract: strike in foreign currency, maturity in years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractSpec {
    pub strike: f64,
    pub maturity: f64,
}

impl ContractSpec {
    pub fn new(strike: f64, maturity: f64) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::InvalidInput(format!(
                "strike must be positive and finite, got {strike}"
            )));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::InvalidInput(format!(
                "maturity must be positive and finite, got {maturity}"
            )));
        }
        Ok(ContractSpec { strike, maturity })
    }
}

/// Terminal payoff of the quanto call in domestic currency: the foreign-asset
/// excess over strike, converted at the fixed rate.
pub fn quanto_payoff(s_f_t: f64, strike: f64, q_fix: f64) -> Result<f64> {
    for (name, v) in [("s_f_t", s_f_t), ("strike", strike), ("q_fix", q_fix)] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
        }
    }
    Ok(q_fix * (s_f_t - strike).max(0.0))
}

/// Correlation of the asset with Q from the correlation with Q^-1. Inverting
/// the rate flips the sign of log returns, so the correlation negates.
pub fn rho_domestic_from_foreign(rho_sf_qinv: f64) -> Result<f64> {
    if !rho_sf_qinv.is_finite() || rho_sf_qinv.abs() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "correlation must lie in [-1, 1], got {rho_sf_qinv}"
        )));
    }
    Ok(-rho_sf_qinv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_basic_values() {
        assert_eq!(quanto_payoff(2600.0, 2500.0, 3.0).unwrap(), 300.0);
        assert_eq!(quanto_payoff(2400.0, 2500.0, 3.0).unwrap(), 0.0);
        assert_eq!(quanto_payoff(2500.0, 2500.0, 3.0).unwrap(), 0.0);
        assert!(quanto_payoff(f64::NAN, 2500.0, 3.0).is_err());
        assert!(quanto_payoff(2600.0, f64::INFINITY, 3.0).is_err());
    }

    #[test]
    fn correlation_sign_flip() {
        assert_eq!(rho_domestic_from_foreign(-0.7).unwrap(), 0.7);
        assert_eq!(rho_domestic_from_foreign(0.0).unwrap(), 0.0);
        assert_eq!(rho_domestic_from_foreign(1.0).unwrap(), -1.0);
        assert!(rho_domestic_from_foreign(1.5).is_err());
        assert!(rho_domestic_from_foreign(f64::NAN).is_err());
    }

    #[test]
    fn config_parses_complete_file() {
        let text = "rho_sf_qinv = -0.7\nq0 = 3.1\ns0 = 2500\nr = 0.1\nrf = 0.01\nq_fix = 3\n";
        let cfg = MarketConfig::from_kv_str(text).unwrap();
        assert_eq!(cfg.rho_sf_qinv, -0.7);
        assert_eq!(cfg.q0, 3.1);
        assert_eq!(cfg.s0, 2500.0);
        assert_eq!(cfg.r, 0.1);
        assert_eq!(cfg.rf, 0.01);
        assert_eq!(cfg.q_fix, 3.0);
        assert!((cfg.qinv0() - 1.0 / 3.1).abs() < 1e-16);
    }

    #[test]
    fn config_roundtrips_through_render() {
        let cfg = MarketConfig::new(-0.7, 3.1, 2500.0, 0.1, 0.01, 3.0).unwrap();
        let back = MarketConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_unknown_key() {
        let text = "rho_sf_qinv = -0.7\nq0 = 3.1\ns0 = 2500\nr = 0.1\nrf = 0.01\nq_fix = 3\nvol = 0.2\n";
        let err = MarketConfig::from_kv_str(text).unwrap_err();
        assert!(err.to_string().contains("unknown key `vol`"), "{err}");
    }

    #[test]
    fn config_error_lists_every_missing_key() {
        let err = MarketConfig::from_kv_str("q0 = 3.1\nr = 0.1\n").unwrap_err();
        let msg = err.to_string();
        for key in ["rho_sf_qinv", "s0", "rf", "q_fix"] {
            assert!(msg.contains(key), "missing-key list lacks {key}: {msg}");
        }
        assert!(!msg.contains("q0,") && !msg.contains(" r,"), "{msg}");
    }

    #[test]
    fn config_rejects_bad_values() {
        let t = |pair: &str| {
            format!("rho_sf_qinv = -0.7\nq0 = 3.1\ns0 = 2500\nr = 0.1\nrf = 0.01\n{pair}\n")
        };
        assert!(MarketConfig::from_kv_str(&t("q_fix = zero")).is_err());
        assert!(MarketConfig::from_kv_str(&t("q_fix = -3")).is_err());
        assert!(MarketConfig::from_kv_str(&t("q_fix = inf")).is_err());
    }

    #[test]
    fn heston_params_validate() {
        assert!(HestonParams::new(-0.7, 1.0, 0.1, 0.2, 0.5).is_ok());
        assert!(HestonParams::new(-1.5, 1.0, 0.1, 0.2, 0.5).is_err());
        assert!(HestonParams::new(-0.7, -1.0, 0.1, 0.2, 0.5).is_err());
        assert!(HestonParams::new(-0.7, 1.0, 0.1, -0.2, 0.5).is_err());
        assert!(HestonParams::new(f64::NAN, 1.0, 0.1, 0.2, 0.5).is_err());
        let gbm = HestonParams::from_array([0.0, 0.0, 0.2, 0.2, 0.0]).unwrap();
        assert!(gbm.is_constant_vol());
        assert!(!HestonParams::new(-0.7, 1.0, 0.1, 0.2, 0.5).unwrap().is_constant_vol());
    }

    #[test]
    fn contract_validates() {
        assert!(ContractSpec::new(2500.0, 3.0).is_ok());
        assert!(ContractSpec::new(0.0, 3.0).is_err());
        assert!(ContractSpec::new(2500.0, 0.0).is_err());
        assert!(ContractSpec::new(2500.0, f64::NAN).is_err());
    }
}
