//! Scores: mean squared error, adjusted Rand index and the replicate
//! bias/variance decomposition.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// One filter estimate at one time step of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub t: usize,
    pub filter_name: String,
    pub k: usize,
    pub zeta: usize,
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
    pub partition_used: Option<Partition>,
    pub wall_time_ms: f64,
}

impl RunRecord {
    /// Mean over components of the squared error.
    pub fn squared_error(&self) -> f64 {
        mean_squared_error(&self.estimate, &self.truth)
    }
}

pub fn mean_squared_error(estimate: &[f64], truth: &[f64]) -> f64 {
    debug_assert_eq!(estimate.len(), truth.len());
    let sum: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, x)| (e - x) * (e - x))
        .sum();
    sum / estimate.len().max(1) as f64
}

/// Mean over records, time steps and components of the squared error.
pub fn mse(records: &[RunRecord]) -> Result<f64> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let d_x = first.truth.len();
    let mut total = 0.0;
    for r in records {
        if r.truth.len() != d_x || r.estimate.len() != d_x {
            return Err(Error::DimensionMismatch {
                expected: d_x,
                got: r.estimate.len().min(r.truth.len()),
                context: "record dimension",
            });
        }
        total += r.squared_error();
    }
    Ok(total / records.len() as f64)
}

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index from the pair-counting contingency table.
pub fn ari(p1: &Partition, p2: &Partition) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::IndexSetMismatch);
    }
    ari_from_labels(&p1.labels(), &p2.labels())
}

pub fn ari_from_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::IndexSetMismatch);
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sum_rows: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sum_cols: f64 = cols.values().map(|&n| choose2(n)).sum();
    let total = choose2(a.len());
    let expected = sum_rows * sum_cols / total.max(1.0);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions trivial (all singletons or one block): identical iff equal
        return Ok(if index == max_index { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVariance {
    pub bias_sq: f64,
    pub variance: f64,
}

/// Bias and variance of `M` filter replicates run on the same data.
///
/// `replicates[m][t]` is the estimate vector of replicate `m` at step `t`;
/// `reference[t]` is the exact posterior mean. Per `(t, n)` the bias is the
/// replicate mean minus the reference and the variance is the unbiased
/// replicate variance; both are averaged over all `(t, n)`, the bias after
/// squaring.
pub fn bias_variance(replicates: &[Vec<Vec<f64>>], reference: &[Vec<f64>]) -> Result<BiasVariance> {
    let m = replicates.len();
    if m < 2 {
        return Err(Error::TooFewReplicates(m));
    }
    let steps = reference.len();
    if steps == 0 {
        return Err(Error::EmptyInput);
    }
    let d_x = reference[0].len();
    let mut bias_acc = 0.0;
    let mut var_acc = 0.0;
    for t in 0..steps {
        for n in 0..d_x {
            let mut mean = 0.0;
            for rep in replicates {
                if rep.len() != steps || rep[t].len() != d_x {
                    return Err(Error::DimensionMismatch {
                        expected: d_x,
                        got: rep.get(t).map_or(0, Vec::len),
                        context: "replicate estimates",
                    });
                }
                mean += rep[t][n];
            }
            mean /= m as f64;
            let var: f64 = replicates
                .iter()
                .map(|rep| (rep[t][n] - mean).powi(2))
                .sum::<f64>()
                / (m as f64 - 1.0);
            let bias = mean - reference[t][n];
            bias_acc += bias * bias;
            var_acc += var;
        }
    }
    let cells = (steps * d_x) as f64;
    Ok(BiasVariance {
        bias_sq: bias_acc / cells,
        variance: var_acc / cells,
    })
}

/// Mean and standard error of the mean; NaN entries are skipped.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let n = finite.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
