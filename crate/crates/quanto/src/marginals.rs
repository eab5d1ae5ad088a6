//! Empirical marginal distributions built from simulated terminal samples.
//!
//! The CDF interpolates linearly between plotting positions k/(M+1) at the
//! order statistics, which keeps both tails strictly inside (0, 1) so the
//! distribution can be composed with copula draws without edge cases.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EmpiricalMarginal {
    /// Distinct sample values, ascending.
    xs: Vec<f64>,
    /// Plotting position at each value; tied samples collapse to the mean of
    /// their ranks, so `ps` is strictly increasing along with `xs`.
    ps: Vec<f64>,
}

impl EmpiricalMarginal {
    /// Build from raw samples. Needs at least two finite values; ties are
    /// merged into a single node at the averaged plotting position.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 samples to build a marginal, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "samples must be finite, found {bad}"
            )));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let m = sorted.len() as f64;

        let mut xs = Vec::with_capacity(sorted.len());
        let mut ps = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            // Ranks are 1-based; a run [i, j) averages to (i + j + 1) / 2.
            let mean_rank = (i + j + 1) as f64 / 2.0;
            xs.push(sorted[i]);
            ps.push(mean_rank / (m + 1.0));
            i = j;
        }
        Ok(EmpiricalMarginal { xs, ps })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Interpolated CDF. Clamps to the first/last plotting position outside
    /// the sample range, so the value always lies strictly inside (0, 1).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ps[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ps.last().unwrap();
        }
        // Index of the first node strictly above x; x lies in [idx-1, idx).
        let idx = self.xs.partition_point(|v| *v <= x);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (p0, p1) = (self.ps[idx - 1], self.ps[idx]);
        p0 + (p1 - p0) * (x - x0) / (x1 - x0)
    }

    /// Generalized inverse of [`cdf`]. `u` must lie in the open interval
    /// (0, 1); values beyond the outermost plotting positions clamp to the
    /// sample extremes.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidInput(format!(
                "quantile level must lie in (0, 1), got {u}"
            )));
        }
        if u <= self.ps[0] {
            return Ok(self.xs[0]);
        }
        if u >= *self.ps.last().unwrap() {
            return Ok(*self.xs.last().unwrap());
        }
        let idx = self.ps.partition_point(|p| *p <= u);
        let (p0, p1) = (self.ps[idx - 1], self.ps[idx]);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        Ok(x0 + (x1 - x0) * (u - p0) / (p1 - p0))
    }
}
