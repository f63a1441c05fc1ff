//! Systematic resampling.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Draws one uniform offset and resamples against the cumulative weights.
pub fn systematic_resample(weights: &[f64], rng: &mut RngStream) -> Result<Vec<usize>> {
    let u = rng.uniform();
    systematic_resample_with_offset(weights, u)
}

/// Indices selected by the points `(u + i) / N` for `i = 0..N` against the
/// cumulative sum of `weights`. Weights need not be normalized.
pub fn systematic_resample_with_offset(weights: &[f64], u: f64) -> Result<Vec<usize>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if !(total > 0.0) || !total.is_finite() || weights.iter().any(|w| w.is_nan()) {
        return Err(Error::DegenerateWeights);
    }
    let step = total / n as f64;
    let mut indices = Vec::with_capacity(n);
    let mut j = 0;
    let mut cumulative = weights[0].max(0.0);
    for i in 0..n {
        let point = (u + i as f64) * step;
        while cumulative <= point && j + 1 < n {
            j += 1;
            cumulative += weights[j].max(0.0);
        }
        indices.push(j);
    }
    Ok(indices)
}
