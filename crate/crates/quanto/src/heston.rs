//! Monte Carlo simulation of square-root stochastic volatility dynamics:
//! a single asset, and the coupled four-factor asset/FX system.
//!
//! Discretization is full-truncation Euler for the variance factors (the
//! variance is floored at zero in both drift and diffusion, but the state
//! itself may go negative) and exact log-Euler for prices, so terminal
//! prices are strictly positive by construction.

use crate::error::{Error, Result};
use crate::market::HestonParams;
use crate::parallel::{fill_indexed, worker_count};
use crate::rng::CounterRng;

/// Default time resolution: 96 steps per year, never fewer than 24 in total.
pub fn default_steps(maturity: f64) -> usize {
    ((96.0 * maturity).ceil() as usize).max(24)
}

/// Simulation size and seed. Paths draw from per-(path, step) counter blocks
/// so the grid fully determines every random number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimGrid {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl SimGrid {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 || n_steps == 0 {
            return Err(Error::InvalidInput(format!(
                "need at least one path and one step, got {n_paths} paths, {n_steps} steps"
            )));
        }
        Ok(SimGrid {
            n_paths,
            n_steps,
            seed,
        })
    }

    /// Production resolution: 200k paths at the default step density.
    pub fn pricing(maturity: f64, seed: u64) -> Self {
        SimGrid {
            n_paths: 200_000,
            n_steps: default_steps(maturity),
            seed,
        }
    }

    /// Cheap resolution for smoke tests: 20k paths.
    pub fn smoke(maturity: f64, seed: u64) -> Self {
        SimGrid {
            n_paths: 20_000,
            n_steps: default_steps(maturity),
            seed,
        }
    }

    pub fn with_paths(self, n_paths: usize) -> Self {
        SimGrid { n_paths, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SimGrid { seed, ..self }
    }
}

fn check_sim_inputs(spot: f64, drift: f64, maturity: f64) -> Result<()> {
    if !(spot.is_finite() && spot > 0.0) {
        return Err(Error::InvalidInput(format!(
            "spot must be positive and finite, got {spot}"
        )));
    }
    if !drift.is_finite() {
        return Err(Error::InvalidInput(format!("drift must be finite, got {drift}")));
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::InvalidInput(format!(
            "maturity must be positive and finite, got {maturity}"
        )));
    }
    Ok(())
}

/// Terminal prices of one asset under its stochastic volatility dynamics
/// with the given log drift. Output slot i is a pure function of
/// (grid.seed, i), so results are identical for any worker count.
pub fn simulate_heston_terminal(
    spot: f64,
    params: &HestonParams,
    drift: f64,
    maturity: f64,
    grid: &SimGrid,
) -> Result<Vec<f64>> {
    simulate_heston_terminal_with_workers(spot, params, drift, maturity, grid, worker_count())
}

/// As [`simulate_heston_terminal`] with an explicit worker count.
pub fn simulate_heston_terminal_with_workers(
    spot: f64,
    params: &HestonParams,
    drift: f64,
    maturity: f64,
    grid: &SimGrid,
    workers: usize,
) -> Result<Vec<f64>> {
    check_sim_inputs(spot, drift, maturity)?;
    let rng = CounterRng::new(grid.seed);
    let n_steps = grid.n_steps;
    let dt = maturity / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let x0 = spot.ln();
    let rho = params.rho;
    let rho_orth = (1.0 - rho * rho).sqrt();
    let (kappa, v_bar, v0, eta) = (params.kappa, params.v_bar, params.v0, params.eta);

    let out = fill_indexed(grid.n_paths, workers, move |p| {
        let mut x = x0;
        let mut v = v0;
        for s in 0..n_steps {
            let z = rng.normals2(p as u64, s as u64);
            let vp = v.max(0.0);
            let sv = vp.sqrt();
            x += (drift - 0.5 * vp) * dt + sv * sqrt_dt * z[0];
            let zv = rho * z[0] + rho_orth * z[1];
            v += kappa * (v_bar - vp) * dt + eta * sv * sqrt_dt * zv;
        }
        x.exp()
    });
    Ok(out)
}

/// Joint dynamics of the foreign asset and the inverted FX rate under the
/// foreign risk-neutral measure. Each price has its own variance factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DswParams {
    /// Asset variance dynamics; `phi_sf.rho` links asset returns to asset
    /// variance shocks.
    pub phi_sf: HestonParams,
    /// Inverted-FX variance dynamics; `phi_qinv.rho` links FX returns to FX
    /// variance shocks.
    pub phi_qinv: HestonParams,
    /// Correlation between asset returns and inverted-FX returns.
    pub rho_cross: f64,
    /// Domestic short rate.
    pub r: f64,
    /// Foreign short rate. Under the foreign measure the asset drifts at
    /// `rf` and the inverted FX rate at `rf - r`.
    pub rf: f64,
}

impl DswParams {
    pub fn new(
        phi_sf: HestonParams,
        phi_qinv: HestonParams,
        rho_cross: f64,
        r: f64,
        rf: f64,
    ) -> Result<Self> {
        if !rho_cross.is_finite() || rho_cross.abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "rho_cross must lie in [-1, 1], got {rho_cross}"
            )));
        }
        if !r.is_finite() || !rf.is_finite() {
            return Err(Error::InvalidInput(format!(
                "rates must be finite, got r={r} rf={rf}"
            )));
        }
        Ok(DswParams {
            phi_sf,
            phi_qinv,
            rho_cross,
            r,
            rf,
        })
    }
}

/// Terminal pairs (S_f(T), Q^-1(T)) of the coupled four-factor system.
///
/// The four Brownian drivers are mixed from i.i.d. normals (z0, z1, z2, z3)
/// by a lower-triangular square root of the correlation matrix:
///
/// ```text
/// asset returns  W1 = z0
/// asset variance W2 = rho_sf z0 + sqrt(1 - rho_sf^2) z1
/// FX returns     W3 = rho z0 + sqrt(1 - rho^2) z2
/// FX variance    W4 = rho rho_q z0 + rho_q sqrt(1 - rho^2) z2
///                     + sqrt(1 - rho_q^2) z3
/// ```
///
/// so W4 = rho_q W3 + sqrt(1 - rho_q^2) z3: each variance factor correlates
/// with its own price factor, and all other cross-links flow through the
/// price-price correlation `rho`.
pub fn simulate_dsw_joint(
    s0: f64,
    qinv0: f64,
    params: &DswParams,
    maturity: f64,
    grid: &SimGrid,
) -> Result<Vec<(f64, f64)>> {
    simulate_dsw_joint_with_workers(s0, qinv0, params, maturity, grid, worker_count())
}

/// As [`simulate_dsw_joint`] with an explicit worker count.
pub fn simulate_dsw_joint_with_workers(
    s0: f64,
    qinv0: f64,
    params: &DswParams,
    maturity: f64,
    grid: &SimGrid,
    workers: usize,
) -> Result<Vec<(f64, f64)>> {
    check_sim_inputs(s0, params.rf, maturity)?;
    if !(qinv0.is_finite() && qinv0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "qinv0 must be positive and finite, got {qinv0}"
        )));
    }

    let rng = CounterRng::new(grid.seed);
    let n_steps = grid.n_steps;
    let dt = maturity / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let xs0 = s0.ln();
    let xq0 = qinv0.ln();

    let p = *params;
    let rho = p.rho_cross;
    let rho_orth = (1.0 - rho * rho).sqrt();
    let rho1 = p.phi_sf.rho;
    let rho1_orth = (1.0 - rho1 * rho1).sqrt();
    let rho2 = p.phi_qinv.rho;
    let rho2_orth = (1.0 - rho2 * rho2).sqrt();
    let drift_s = p.rf;
    let drift_q = p.rf - p.r;

    let out = fill_indexed(grid.n_paths, workers, move |path| {
        let mut xs = xs0;
        let mut xq = xq0;
        let mut v1 = p.phi_sf.v0;
        let mut v2 = p.phi_qinv.v0;
        for s in 0..n_steps {
            let z = rng.normals4(path as u64, s as u64);
            let z_s = z[0];
            let z_v1 = rho1 * z[0] + rho1_orth * z[1];
            let z_q = rho * z[0] + rho_orth * z[2];
            let z_v2 = rho2 * z_q + rho2_orth * z[3];

            let v1p = v1.max(0.0);
            let v2p = v2.max(0.0);
            let sv1 = v1p.sqrt();
            let sv2 = v2p.sqrt();

            xs += (drift_s - 0.5 * v1p) * dt + sv1 * sqrt_dt * z_s;
            xq += (drift_q - 0.5 * v2p) * dt + sv2 * sqrt_dt * z_q;
            v1 += p.phi_sf.kappa * (p.phi_sf.v_bar - v1p) * dt + p.phi_sf.eta * sv1 * sqrt_dt * z_v1;
            v2 += p.phi_qinv.kappa * (p.phi_qinv.v_bar - v2p) * dt
                + p.phi_qinv.eta * sv2 * sqrt_dt * z_v2;
        }
        (xs.exp(), xq.exp())
    });
    Ok(out)
}
