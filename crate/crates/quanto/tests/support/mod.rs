//! Independent oracles for the integration suites: plain quadrature against
//! textbook density/characteristic-function representations, sharing no code
//! with the crate's own closed forms.

#![allow(dead_code)]

use num_complex::Complex64;
use quanto::market::HestonParams;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Composite Simpson on n intervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// European call by direct quadrature of payoff times lognormal density in
/// the standardized log return variable.
pub fn bs_call_quadrature(spot: f64, strike: f64, vol: f64, t: f64, rate: f64) -> f64 {
    let lower = (spot - strike * (-rate * t).exp()).max(0.0);
    if vol == 0.0 {
        return lower;
    }
    let st = vol * t.sqrt();
    let mu = (rate - 0.5 * vol * vol) * t;
    let z_lo = ((strike / spot).ln() - mu) / st;
    let a = z_lo.max(-13.0);
    let b = st + 13.0;
    if a >= b {
        return 0.0;
    }
    let f = |z: f64| norm_pdf(z) * (spot * (mu + st * z).exp() - strike);
    (-rate * t).exp() * simpson(f, a, b, 100_000)
}

/// Heston vanilla call by characteristic-function quadrature, using the
/// branch-stable form of the log-price CF (g defined with beta - d so the
/// complex log never crosses the cut for long maturities).
pub fn heston_cf_call(spot: f64, strike: f64, maturity: f64, rate: f64, p: &HestonParams) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let x = spot.ln();
    let lnk = strike.ln();
    let eta2 = p.eta * p.eta;
    let cf = |u: Complex64| -> Complex64 {
        let beta = Complex64::new(p.kappa, 0.0) - i * p.rho * p.eta * u;
        let d = (beta * beta + eta2 * (i * u + u * u)).sqrt();
        let g = (beta - d) / (beta + d);
        let emdt = (-d * maturity).exp();
        let one = Complex64::new(1.0, 0.0);
        let big_c =
            p.kappa * p.v_bar / eta2 * ((beta - d) * maturity - 2.0 * ((one - g * emdt) / (one - g)).ln());
        let big_d = (beta - d) / eta2 * (one - emdt) / (one - g * emdt);
        (big_c + big_d * p.v0 + i * u * (x + rate * maturity)).exp()
    };
    // phi(-i) is the forward by the martingale identity; evaluating the
    // closed form there hits 0/0 when kappa = rho = 0.
    let denom = Complex64::new(spot * (rate * maturity).exp(), 0.0);
    let integrand = |u: f64, shift: bool| -> f64 {
        let uc = Complex64::new(u, 0.0);
        let num = if shift { cf(uc - i) / denom } else { cf(uc) };
        ((-i * u * lnk).exp() * num / (i * u)).re
    };
    let p1 = 0.5
        + simpson(|u| integrand(u, true), 1e-8, 500.0, 100_000) / std::f64::consts::PI;
    let p2 = 0.5
        + simpson(|u| integrand(u, false), 1e-8, 500.0, 100_000) / std::f64::consts::PI;
    spot * p1 - strike * (-rate * maturity).exp() * p2
}

/// Bivariate standard normal CDF P(X <= a, Y <= b) with correlation rho,
/// reduced to a single integral over the conditional normal.
pub fn norm2_cdf(a: f64, b: f64, rho: f64) -> f64 {
    assert!(rho.abs() < 1.0);
    let s = (1.0 - rho * rho).sqrt();
    let lo = -9.0;
    if a <= lo {
        return 0.0;
    }
    let f = |x: f64| norm_pdf(x) * norm_cdf((b - rho * x) / s);
    simpson(f, lo, a.min(9.0), 20_000) + if a > 9.0 { norm_cdf(b) - norm_cdf(9.0) } else { 0.0 }
}

/// Analytic Gaussian copula.
pub fn gaussian_copula_cdf(u: f64, v: f64, rho: f64) -> f64 {
    let inv = |p: f64| -> f64 {
        // Bisection on the oracle's own normal CDF; independent of the
        // crate's quantile function.
        let (mut lo, mut hi) = (-9.0f64, 9.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if norm_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    norm2_cdf(inv(u), inv(v), rho)
}

/// Analytic Frank copula.
pub fn frank_copula_cdf(u: f64, v: f64, alpha: f64) -> f64 {
    assert!(alpha != 0.0);
    let num = ((-alpha * u).exp() - 1.0) * ((-alpha * v).exp() - 1.0);
    let den = (-alpha).exp() - 1.0;
    -(1.0 + num / den).ln() / alpha
}

/// Joint CDF of the product-form Gaussian kernel mixture by brute 2-D
/// Simpson over the density. Small N only.
pub fn kernel_cdf_2d_quadrature(rows: &[(f64, f64)], h: f64, s: f64, r: f64) -> f64 {
    let n = rows.len() as f64;
    let density = |x: f64, y: f64| -> f64 {
        let mut acc = 0.0;
        for &(a, b) in rows {
            acc += norm_pdf((x - a) / h) * norm_pdf((y - b) / h);
        }
        acc / (n * h * h)
    };
    let x_lo = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min) - 9.0 * h;
    let y_lo = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min) - 9.0 * h;
    if s <= x_lo || r <= y_lo {
        return 0.0;
    }
    // Outer Simpson in x of the inner Simpson in y.
    simpson(
        |x| simpson(|y| density(x, y), y_lo, r, 600),
        x_lo,
        s,
        600,
    )
}

/// Standard errors add in quadrature for independent estimates.
pub fn combined_se(se1: f64, se2: f64) -> f64 {
    (se1 * se1 + se2 * se2).sqrt()
}
