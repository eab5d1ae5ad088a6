//! Benchmark cases: the three pricers side by side on a strike grid.
//!
//! Six built-in cases pair a dependence family for the copula pricer with
//! volatility dynamics for both marginals. The four-factor Monte Carlo
//! always correlates the Brownian drivers at the market correlation, while
//! the copula pricer swaps in the case's dependence family; comparing the
//! columns isolates what the dependence assumption does to the price.
//!
//! Reproducibility contract: every random stream in a case run is derived
//! from (master seed, fixed purpose tag), so a case id, seed, and path
//! count pin every output byte.

use crate::blackscholes::{bs_implied_vol, bs_vega, BsQuote};
use crate::copula::{generate_expert_matrix, normal_scores_corr, CopulaFamily, KernelCopula};
use crate::error::{BandBound, Error, Result};
use crate::heston::{simulate_heston_terminal, DswParams, SimGrid};
use crate::marginals::EmpiricalMarginal;
use crate::market::{ContractSpec, HestonParams, MarketConfig};
use crate::math::mean_and_std_error;
use crate::pricing::{price_from_joint_terminals, price_practitioner, PriceResult};
use crate::rng::derive_seed;

/// Purpose tags for sub-seed derivation. Fixed forever; changing one would
/// silently re-randomize published numbers.
mod tag {
    pub const VANILLA_SF: u64 = 1;
    pub const VANILLA_QINV: u64 = 2;
    pub const DSW: u64 = 3;
    pub const MARGINAL_SF: u64 = 4;
    pub const MARGINAL_QINV: u64 = 5;
    pub const EXPERT_MATRIX: u64 = 6;
    pub const COPULA_DRAWS: u64 = 7;
    pub const FRANK_CALIBRATION: u64 = 8;
    pub const DEPENDENCE_CAL_MODEL: u64 = 9;
    pub const DEPENDENCE_CAL_MATRIX: u64 = 10;
    pub const DEPENDENCE_CAL_DRAWS: u64 = 11;
}

/// Scenario matrix size used by the built-in cases.
pub const EXPERT_ROWS: usize = 100_000;

/// Implied-vol extraction runs at this multiple of the pricing path count;
/// vol noise otherwise dominates the closed-form column.
const VANILLA_PATH_FACTOR: usize = 4;

/// Market used by the built-in cases when no config file is supplied.
pub fn default_market() -> MarketConfig {
    MarketConfig::new(-0.7, 3.1, 2500.0, 0.1, 0.01, 3.0).unwrap()
}

/// 21 uniform strikes from half to one-and-a-half spot; index 10 is exactly
/// at the money.
pub fn default_strike_grid(s0: f64) -> Vec<f64> {
    (0..21).map(|i| s0 * (0.5 + 0.05 * i as f64)).collect()
}

/// Flat variance at 0.2 and no vol-of-vol: lognormal marginals.
fn phi_flat() -> HestonParams {
    HestonParams::new(0.0, 0.0, 0.2, 0.2, 0.0).unwrap()
}

/// Fast mean reversion toward 0.1 from 0.2 with strong vol-of-vol and
/// leverage: a pronounced smile.
fn phi_smile() -> HestonParams {
    HestonParams::new(-0.7, 1.0, 0.1, 0.2, 0.5).unwrap()
}

/// One benchmark case, fully resolved: any calibration implied by the case
/// definition has already run.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub case_id: u8,
    pub family: CopulaFamily,
    pub phi_sf: HestonParams,
    pub phi_qinv: HestonParams,
    pub maturity: f64,
    pub strike_grid: Vec<f64>,
    /// Set when the family parameter came out of a calibration rather than
    /// the case table.
    pub calibrated_alpha: Option<f64>,
    /// Set when the Gaussian correlation was fitted to the four-factor
    /// model's terminal dependence rather than taken from the market.
    pub calibrated_rho: Option<f64>,
}

impl CaseSpec {
    /// Resolve a built-in case (1 through 6) against a market config.
    ///
    /// * 1: Gaussian dependence at the market correlation, flat vols, T = 3.
    /// * 2: Gaussian dependence fitted to the four-factor model's terminal
    ///   correlation, smile vols, T = 3.
    /// * 3: Student-t dependence (3 dof), smile vols, T = 3.
    /// * 4: case 3 at T = 0.25.
    /// * 5: Frank dependence calibrated to the market correlation, flat
    ///   vols, T = 3.
    /// * 6: case 5 at T = 0.25.
    ///
    /// Cases 2, 5 and 6 run a calibration seeded from `master_seed`, so the
    /// same seed always resolves the same parameter. Case 2 needs one
    /// because vol-of-vol dilutes dependence over time: driving the
    /// four-factor model at a correlation of -0.7 leaves the three-year
    /// terminals with a normal-scores correlation near -0.59, so a Gaussian
    /// copula pinned at the driver value would describe a visibly different
    /// joint distribution than the model it is benchmarked against. Case 1
    /// skips it: without vol-of-vol the terminal copula is exactly Gaussian
    /// at the driver correlation.
    pub fn builtin(case_id: u8, mkt: &MarketConfig, master_seed: u64) -> Result<Self> {
        let rho = mkt.rho_sf_qinv;
        let (family, phi, maturity, calibrated_alpha, calibrated_rho) = match case_id {
            1 => (CopulaFamily::Gaussian { rho }, phi_flat(), 3.0, None, None),
            2 => {
                let fitted = fit_gaussian_rho(mkt, &phi_smile(), 3.0, master_seed)?;
                (
                    CopulaFamily::Gaussian { rho: fitted },
                    phi_smile(),
                    3.0,
                    None,
                    Some(fitted),
                )
            }
            3 => (
                CopulaFamily::StudentT { rho, dof: 3.0 },
                phi_smile(),
                3.0,
                None,
                None,
            ),
            4 => (
                CopulaFamily::StudentT { rho, dof: 3.0 },
                phi_smile(),
                0.25,
                None,
                None,
            ),
            5 | 6 => {
                let alpha = crate::copula::calibrate_frank_alpha(
                    rho,
                    derive_seed(master_seed, tag::FRANK_CALIBRATION),
                )?;
                (
                    CopulaFamily::Frank { alpha },
                    phi_flat(),
                    if case_id == 5 { 3.0 } else { 0.25 },
                    Some(alpha),
                    None,
                )
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "case id must be 1..=6, got {other}"
                )))
            }
        };
        Ok(CaseSpec {
            case_id,
            family,
            phi_sf: phi,
            phi_qinv: phi,
            maturity,
            strike_grid: default_strike_grid(mkt.s0),
            calibrated_alpha,
            calibrated_rho,
        })
    }
}

/// Terminal-dependence calibration sizes: the model target uses more paths
/// than a pricing run, and the estimator gain is measured on enough copula
/// draws that its noise stays an order below the bias it corrects.
const DEPENDENCE_CAL_PATHS: usize = 400_000;
const DEPENDENCE_CAL_DRAWS: usize = 1_000_000;

/// Gaussian family parameter fitted so the obtained kernel copula carries
/// the four-factor model's terminal rank dependence.
///
/// Two stages. First the model's terminal normal-scores correlation is
/// measured from a joint simulation. Then the matrix parameter is chosen so
/// that a kernel copula *built from such a matrix* reproduces that target:
/// kernel smoothing attenuates rank dependence by roughly 1/(1 + h^2), so
/// fitting through the estimator rather than at the matrix level removes a
/// bias that is small on CDF values but visible in prices. The estimator
/// gain is measured once as (copula-sample correlation) / (matrix
/// correlation), which is linear in the parameter over the step involved.
fn fit_gaussian_rho(
    mkt: &MarketConfig,
    phi: &HestonParams,
    maturity: f64,
    master_seed: u64,
) -> Result<f64> {
    let grid = SimGrid::pricing(maturity, derive_seed(master_seed, tag::DEPENDENCE_CAL_MODEL))
        .with_paths(DEPENDENCE_CAL_PATHS);
    let params = DswParams::new(*phi, *phi, mkt.rho_sf_qinv, mkt.r, mkt.rf)?;
    let pairs = crate::heston::simulate_dsw_joint(mkt.s0, mkt.qinv0(), &params, maturity, &grid)?;
    let target = normal_scores_corr(&pairs)?;
    drop(pairs);

    let mat_seed = derive_seed(master_seed, tag::DEPENDENCE_CAL_MATRIX);
    let draw_seed = derive_seed(master_seed, tag::DEPENDENCE_CAL_DRAWS);
    let gain_at = |rho: f64| -> Result<f64> {
        let matrix =
            generate_expert_matrix(&CopulaFamily::Gaussian { rho }, EXPERT_ROWS, mat_seed)?;
        let realized = normal_scores_corr(matrix.rows())?;
        let cop = KernelCopula::from_matrix(&matrix)?;
        let draws = cop.sample(DEPENDENCE_CAL_DRAWS, draw_seed)?;
        Ok(normal_scores_corr(&draws)? / realized)
    };
    let fitted = target / gain_at(target)?;
    // One verification pass with the same random numbers; the gain varies
    // slowly, so a miss here means the linear model broke down.
    if (gain_at(fitted)? * fitted - target).abs() > 0.005 {
        return Err(Error::Convergence(format!(
            "dependence fit did not reproduce the target correlation {target}"
        )));
    }
    Ok(fitted)
}

/// One strike of a case run: the three prices and the Monte Carlo errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseRow {
    pub strike: f64,
    pub price_practitioner: f64,
    pub price_dsw: f64,
    pub se_dsw: f64,
    pub price_copula: f64,
    pub se_copula: f64,
}

/// A full case run plus the vols the closed-form column was fed.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseTable {
    pub case_id: u8,
    pub maturity: f64,
    pub rows: Vec<CaseRow>,
    pub vol_sf_atm: f64,
    pub vol_q_atm: f64,
    pub calibrated_alpha: Option<f64>,
    pub calibrated_rho: Option<f64>,
}

pub const CASE_CSV_HEADER: &str =
    "strike,price_practitioner,price_dsw,se_dsw,price_copula,se_copula";

impl CaseTable {
    /// Render the per-strike table; shortest round-trip float formatting,
    /// strikes ascending.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 96 + 80);
        out.push_str(CASE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.strike,
                r.price_practitioner,
                r.price_dsw,
                r.se_dsw,
                r.price_copula,
                r.se_copula
            ));
        }
        out
    }
}

/// Implied vols of simulated vanilla calls on one leg, used to feed the
/// closed-form pricer. Discounting and inversion run at `disc_rate`; a
/// drift different from the discount rate enters through the forward.
///
/// Far from the money the vanilla has essentially no vega, and sampling
/// noise can push its mean outside the arbitrage band, where no vol exists.
/// With a `fallback` vol such strikes take it (the price is insensitive to
/// the choice there); without one the band violation propagates.
fn implied_vols_from_terminals(
    terminals: &[f64],
    spot: f64,
    drift: f64,
    disc_rate: f64,
    maturity: f64,
    strikes: &[f64],
    fallback: Option<f64>,
) -> Result<Vec<f64>> {
    let disc = (-disc_rate * maturity).exp();
    let spot_eff = spot * ((drift - disc_rate) * maturity).exp();
    let mut vols = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let payoffs: Vec<f64> = terminals.iter().map(|s| (s - k).max(0.0)).collect();
        let (mean, _) = mean_and_std_error(&payoffs);
        match bs_implied_vol(disc * mean, spot_eff, k, maturity, disc_rate) {
            Ok(v) => vols.push(v),
            Err(e @ Error::NoSolution { .. }) => match fallback {
                Some(v) => vols.push(v),
                None => return Err(e),
            },
            Err(e) => return Err(e),
        }
    }
    Ok(vols)
}

/// Run one case over its strike grid.
///
/// `grid.seed` is the master seed; every internal stream derives from it
/// with a fixed purpose tag. `grid.n_paths` sets the Monte Carlo size of
/// both simulation pricers and the copula draw count; the marginals reuse
/// it, and implied-vol extraction runs at four times it.
pub fn run_case(spec: &CaseSpec, mkt: &MarketConfig, grid: &SimGrid) -> Result<CaseTable> {
    let t = spec.maturity;
    let qinv0 = mkt.qinv0();

    // Closed-form inputs: smiles from plain vanilla simulations of each leg
    // under the foreign measure.
    let van_grid_sf = SimGrid::new(
        grid.n_paths * VANILLA_PATH_FACTOR,
        grid.n_steps,
        derive_seed(grid.seed, tag::VANILLA_SF),
    )?;
    let sf_terms = simulate_heston_terminal(mkt.s0, &spec.phi_sf, mkt.rf, t, &van_grid_sf)?;
    let vol_sf_atm =
        implied_vols_from_terminals(&sf_terms, mkt.s0, mkt.rf, mkt.rf, t, &[mkt.s0], None)?[0];
    let strike_vols = implied_vols_from_terminals(
        &sf_terms,
        mkt.s0,
        mkt.rf,
        mkt.rf,
        t,
        &spec.strike_grid,
        Some(vol_sf_atm),
    )?;
    drop(sf_terms);

    let van_grid_q = SimGrid::new(
        grid.n_paths * VANILLA_PATH_FACTOR,
        grid.n_steps,
        derive_seed(grid.seed, tag::VANILLA_QINV),
    )?;
    let q_terms = simulate_heston_terminal(qinv0, &spec.phi_qinv, mkt.rf - mkt.r, t, &van_grid_q)?;
    let vol_q_atm =
        implied_vols_from_terminals(&q_terms, qinv0, mkt.rf - mkt.r, mkt.rf, t, &[qinv0], None)?[0];
    drop(q_terms);

    // Four-factor Monte Carlo leg; one simulation shared by all strikes.
    let dsw_params = DswParams::new(spec.phi_sf, spec.phi_qinv, mkt.rho_sf_qinv, mkt.r, mkt.rf)?;
    let dsw_grid = SimGrid::new(grid.n_paths, grid.n_steps, derive_seed(grid.seed, tag::DSW))?;
    let dsw_pairs = crate::heston::simulate_dsw_joint(mkt.s0, qinv0, &dsw_params, t, &dsw_grid)?;

    // Copula leg: expert matrix from the case family, marginals from
    // single-asset simulations, joint draws shared by all strikes.
    let matrix = generate_expert_matrix(
        &spec.family,
        EXPERT_ROWS,
        derive_seed(grid.seed, tag::EXPERT_MATRIX),
    )?;
    let cop = KernelCopula::from_matrix(&matrix)?;
    drop(matrix);
    let marg_grid_sf = SimGrid::new(
        grid.n_paths,
        grid.n_steps,
        derive_seed(grid.seed, tag::MARGINAL_SF),
    )?;
    let marg_sf = EmpiricalMarginal::from_samples(&simulate_heston_terminal(
        mkt.s0,
        &spec.phi_sf,
        mkt.rf,
        t,
        &marg_grid_sf,
    )?)?;
    let marg_grid_q = SimGrid::new(
        grid.n_paths,
        grid.n_steps,
        derive_seed(grid.seed, tag::MARGINAL_QINV),
    )?;
    let marg_qinv = EmpiricalMarginal::from_samples(&simulate_heston_terminal(
        qinv0,
        &spec.phi_qinv,
        mkt.rf - mkt.r,
        t,
        &marg_grid_q,
    )?)?;
    let draws = cop.sample(grid.n_paths, derive_seed(grid.seed, tag::COPULA_DRAWS))?;
    let mut cop_pairs = Vec::with_capacity(draws.len());
    for (v1, v2) in draws {
        cop_pairs.push((marg_sf.quantile(v1)?, marg_qinv.quantile(v2)?));
    }

    let mut rows = Vec::with_capacity(spec.strike_grid.len());
    for (i, &k) in spec.strike_grid.iter().enumerate() {
        let contract = ContractSpec::new(k, t)?;
        let pract = price_practitioner(mkt, &contract, vol_sf_atm, vol_q_atm, strike_vols[i])?;
        let dsw: PriceResult = price_from_joint_terminals(mkt, &contract, &dsw_pairs)?;
        let cop_price: PriceResult = price_from_joint_terminals(mkt, &contract, &cop_pairs)?;
        rows.push(CaseRow {
            strike: k,
            price_practitioner: pract.price,
            price_dsw: dsw.price,
            se_dsw: dsw.std_error,
            price_copula: cop_price.price,
            se_copula: cop_price.std_error,
        });
    }
    Ok(CaseTable {
        case_id: spec.case_id,
        maturity: t,
        rows,
        vol_sf_atm,
        vol_q_atm,
        calibrated_alpha: spec.calibrated_alpha,
        calibrated_rho: spec.calibrated_rho,
    })
}

/// One strike of an implied-vol smile extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileRow {
    pub strike: f64,
    pub vanilla_price: f64,
    pub price_std_error: f64,
    /// Absent when the Monte Carlo price fell outside the arbitrage band.
    pub implied_vol: Option<f64>,
    /// Vega-propagated standard error of the implied vol.
    pub vol_std_error: Option<f64>,
    pub band_violation: Option<BandBound>,
}

pub const SMILE_CSV_HEADER: &str = "strike,vanilla_price,price_se,implied_vol,vol_se,status";

/// Simulate one leg and extract its implied-vol smile. Strikes where the
/// sampled price violates the arbitrage band come back flagged rather than
/// failing the run; any other inversion error aborts.
pub fn emit_smile(
    phi: &HestonParams,
    spot: f64,
    drift: f64,
    disc_rate: f64,
    maturity: f64,
    strikes: &[f64],
    grid: &SimGrid,
) -> Result<Vec<SmileRow>> {
    if strikes.is_empty() {
        return Err(Error::InvalidInput("need at least one strike".to_string()));
    }
    let terminals = simulate_heston_terminal(spot, phi, drift, maturity, grid)?;
    let disc = (-disc_rate * maturity).exp();
    let spot_eff = spot * ((drift - disc_rate) * maturity).exp();
    let mut rows = Vec::with_capacity(strikes.len());
    for &k in strikes {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "strikes must be positive and finite, got {k}"
            )));
        }
        let payoffs: Vec<f64> = terminals.iter().map(|s| (s - k).max(0.0)).collect();
        let (mean, se) = mean_and_std_error(&payoffs);
        let price = disc * mean;
        let price_se = disc * se;
        match bs_implied_vol(price, spot_eff, k, maturity, disc_rate) {
            Ok(vol) => {
                let vega = bs_vega(&BsQuote::new(spot_eff, k, vol, maturity, disc_rate)?);
                let vol_se = if vega > 0.0 { price_se / vega } else { f64::INFINITY };
                rows.push(SmileRow {
                    strike: k,
                    vanilla_price: price,
                    price_std_error: price_se,
                    implied_vol: Some(vol),
                    vol_std_error: Some(vol_se),
                    band_violation: None,
                });
            }
            Err(Error::NoSolution { violated, .. }) => {
                rows.push(SmileRow {
                    strike: k,
                    vanilla_price: price,
                    price_std_error: price_se,
                    implied_vol: None,
                    vol_std_error: None,
                    band_violation: Some(violated),
                });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(rows)
}

/// Render smile rows; flagged strikes leave the vol fields empty and name
/// the violated bound in the status column.
pub fn smile_to_csv_string(rows: &[SmileRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 80 + 64);
    out.push_str(SMILE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (vol, vol_se, status) = match (r.implied_vol, r.vol_std_error, r.band_violation) {
            (Some(v), Some(se), None) => (format!("{v}"), format!("{se}"), "ok"),
            (_, _, Some(BandBound::LowerIntrinsic)) => {
                (String::new(), String::new(), "below_intrinsic")
            }
            (_, _, Some(BandBound::UpperSpot)) => (String::new(), String::new(), "above_spot"),
            _ => (String::new(), String::new(), "unsolved"),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.strike, r.vanilla_price, r.price_std_error, vol, vol_se, status
        ));
    }
    out
}
