//! Scalar numerics shared across the crate: standard normal functions and
//! order-deterministic reductions.

use statrs::distribution::ContinuousCDF;
use std::sync::LazyLock;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_2PI: f64 = 2.5066282746310002;

static STD_NORMAL: LazyLock<statrs::distribution::Normal> =
    LazyLock::new(|| statrs::distribution::Normal::new(0.0, 1.0).unwrap());

/// Standard normal CDF via the complementary error function. Accurate to a
/// few ulps over the whole real line, including the far tails where the
/// textbook `0.5 * (1 + erf)` form loses all precision.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal quantile. `p` must lie in (0, 1).
pub fn norm_inv(p: f64) -> f64 {
    STD_NORMAL.inverse_cdf(p)
}

/// Sum with a fixed pairwise reduction tree. The result depends only on the
/// slice contents and order, never on chunking or thread count, and the
/// rounding error grows like log(n) rather than n.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

fn pairwise_sq_dev(xs: &[f64], mean: f64) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            let d = x - mean;
            acc += d * d;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sq_dev(&xs[..mid], mean) + pairwise_sq_dev(&xs[mid..], mean)
    }
}

/// Two-pass sample mean and standard error of the mean, both computed with
/// pairwise reductions so they are bit-stable. Standard error uses the
/// n-1 variance denominator; a single observation reports zero error.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty(), "mean of empty slice");
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = pairwise_sq_dev(xs, mean) / (n - 1.0);
    (mean, (var / n).sqrt())
}
