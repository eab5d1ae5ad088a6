//! Implied-vol surfaces extracted from simulated vanillas.

use quanto::experiments::{default_strike_grid, emit_smile};
use quanto::heston::SimGrid;
use quanto::market::HestonParams;

#[test]
fn frozen_variance_gives_a_flat_smile() {
    let phi = HestonParams::new(0.0, 0.0, 0.2, 0.2, 0.0).unwrap();
    let grid = SimGrid::new(50_000, 288, 604).unwrap();
    let strikes = default_strike_grid(2500.0);
    let rows = emit_smile(&phi, 2500.0, 0.01, 0.01, 3.0, &strikes, &grid).unwrap();
    assert_eq!(rows.len(), 21);
    let want = 0.2f64.sqrt();
    for r in &rows {
        let vol = r.implied_vol.expect("all strikes inside the band");
        let band = 3.0 * r.vol_std_error.unwrap();
        assert!(
            (vol - want).abs() <= band,
            "strike {}: vol {vol}, band {band}",
            r.strike
        );
    }
}

#[test]
fn leverage_params_give_a_monotone_smile() {
    let phi = HestonParams::new(-0.7, 1.0, 0.1, 0.2, 0.5).unwrap();
    let grid = SimGrid::new(200_000, 288, 605).unwrap();
    let strikes = default_strike_grid(2500.0);
    let rows = emit_smile(&phi, 2500.0, 0.01, 0.01, 3.0, &strikes, &grid).unwrap();
    let vols: Vec<f64> = rows.iter().map(|r| r.implied_vol.unwrap()).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.vol_std_error.unwrap()).collect();
    // Negative spot-vol correlation slopes the smile downward in strike;
    // noise may wiggle a step but never reverse it significantly.
    for i in 1..vols.len() {
        let slack = 3.0 * (ses[i - 1].powi(2) + ses[i].powi(2)).sqrt();
        assert!(
            vols[i] <= vols[i - 1] + slack,
            "vol rose from {} to {} at strike {}",
            vols[i - 1],
            vols[i],
            rows[i].strike
        );
    }
    let spread = vols[0] - vols[20];
    let spread_err = (ses[0].powi(2) + ses[20].powi(2)).sqrt();
    assert!(
        spread > 3.0 * spread_err,
        "smile spread {spread} not significant against {spread_err}"
    );
}

#[test]
fn doubling_paths_moves_vols_within_noise() {
    let phi = HestonParams::new(-0.7, 1.0, 0.1, 0.2, 0.5).unwrap();
    let strikes = [2000.0, 2500.0, 3000.0];
    let a = emit_smile(
        &phi,
        2500.0,
        0.01,
        0.01,
        3.0,
        &strikes,
        &SimGrid::new(40_000, 288, 606).unwrap(),
    )
    .unwrap();
    let b = emit_smile(
        &phi,
        2500.0,
        0.01,
        0.01,
        3.0,
        &strikes,
        &SimGrid::new(80_000, 288, 607).unwrap(),
    )
    .unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        let (va, vb) = (ra.implied_vol.unwrap(), rb.implied_vol.unwrap());
        let se = (ra.vol_std_error.unwrap().powi(2) + rb.vol_std_error.unwrap().powi(2)).sqrt();
        assert!(
            (va - vb).abs() <= 3.0 * se,
            "strike {}: {va} vs {vb}, se {se}",
            ra.strike
        );
    }
}
