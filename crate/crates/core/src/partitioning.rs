//! Adaptive state-space partitioning: correlation estimation from predicted
//! particles, normalized graph Laplacian, spectral embedding and k-means with
//! cluster-size bounds solved exactly through minimum-cost flow.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, SymMatrix};
use crate::mcf::{quantize_costs, solve_assignment};
use crate::partition::Partition;
use crate::rng::RngStream;

/// Unbiased sample covariance of the columns of `particles` (`d_x × N_p`).
pub fn sample_covariance(particles: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = particles.ncols();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mean = particles.column_mean();
    let mut centered = particles.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / (n as f64 - 1.0);
    Ok(SymMatrix::symmetrized(cov))
}

fn variance_floor(cov: &SymMatrix) -> f64 {
    let max_diag = (0..cov.dim()).map(|i| cov.get(i, i)).fold(0.0, f64::max);
    1e-12 * max_diag
}

/// `D^{-1/2} Σ D^{-1/2}` with unit diagonal and off-diagonals clamped to `[-1, 1]`.
///
/// Fails with [`Error::ZeroVariance`] when a variance is at or below
/// `1e-12 · max(diag)`. See [`similarity_from_cov`] for the tolerant variant
/// used inside the filter.
pub fn correlation_from_cov(cov: &SymMatrix) -> Result<SymMatrix> {
    let floor = variance_floor(cov);
    if let Some(i) = (0..cov.dim()).find(|&i| !(cov.get(i, i) > floor)) {
        return Err(Error::ZeroVariance(i));
    }
    Ok(correlation_unchecked(cov, floor))
}

fn correlation_unchecked(cov: &SymMatrix, floor: f64) -> SymMatrix {
    let n = cov.dim();
    let inv_std: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let v = cov.get(i, i);
            (v > floor).then(|| 1.0 / v.sqrt())
        })
        .collect();
    SymMatrix::from_fn(n, |i, j| {
        if i == j {
            return 1.0;
        }
        match (inv_std[i], inv_std[j]) {
            (Some(a), Some(b)) => (cov.get(i, j) * a * b).clamp(-1.0, 1.0),
            _ => 0.0,
        }
    })
}

/// Similarity `Ω = |Ĉ|`. Components whose variance falls under the floor are
/// treated as uncorrelated with everything else. Returns the floored indices.
pub fn similarity_from_cov(cov: &SymMatrix) -> (SymMatrix, Vec<usize>) {
    let floor = variance_floor(cov);
    let floored = (0..cov.dim()).filter(|&i| !(cov.get(i, i) > floor)).collect();
    (correlation_unchecked(cov, floor).abs(), floored)
}

/// `L_sym = I − D^{-1/2} Ω D^{-1/2}`.
pub fn laplacian_sym(omega: &SymMatrix) -> Result<SymMatrix> {
    let n = omega.dim();
    let m = omega.as_matrix();
    if let Some(idx) = m.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidSpec(format!(
            "similarity entry ({}, {}) is negative",
            idx % n,
            idx / n
        )));
    }
    let deg: Vec<f64> = (0..n).map(|i| m.row(i).sum()).collect();
    if let Some(i) = deg.iter().position(|&d| d <= 1e-12) {
        return Err(Error::IsolatedVertex(i));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(SymMatrix::from_fn(n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - m[(i, j)] * inv_sqrt[i] * inv_sqrt[j]
    }))
}

/// Rows of the first `K` Laplacian eigenvectors, normalized to unit length.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// `d_x × K`; row `i` is the embedded state variable `i`.
    pub points: DMatrix<f64>,
    pub k: usize,
    /// Rows that were exactly zero before normalization and stay zero.
    pub zero_rows: Vec<usize>,
    /// The `K` smallest Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

pub fn spectral_embed(omega: &SymMatrix, k: usize) -> Result<SpectralEmbedding> {
    let n = omega.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidK {
            k,
            d_x: n,
            reason: "need 1 <= K <= d_x",
        });
    }
    let lap = laplacian_sym(omega)?;
    let eig = sym_eigen(&lap)?;
    let mut u = eig.vectors.columns(0, k).into_owned();
    for mut col in u.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-10 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    let mut zero_rows = Vec::new();
    for i in 0..n {
        let norm = u.row(i).norm();
        if norm > 1e-12 {
            u.row_mut(i).unscale_mut(norm);
        } else {
            u.row_mut(i).fill(0.0);
            zero_rows.push(i);
        }
    }
    Ok(SpectralEmbedding {
        points: u,
        k,
        zero_rows,
        eigenvalues: eig.values[..k].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub partition: Partition,
    pub labels: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every assignment step and every centroid update, in order.
    pub objective_trace: Vec<f64>,
}

/// Row-major copy of a point set.
struct Rows {
    data: Vec<f64>,
    dim: usize,
}

impl Rows {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (n, dim) = m.shape();
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            data.extend(m.row(i).iter());
        }
        Self { data, dim }
    }

    fn zeros(n: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; n * dim],
            dim,
        }
    }

    fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `out[i·K + c] = ‖p_i − c_c‖²`.
fn squared_distances(points: &Rows, centers: &Rows, out: &mut Vec<f64>) {
    let k = centers.len();
    out.clear();
    for i in 0..points.len() {
        let p = points.row(i);
        out.extend((0..k).map(|c| dist2(p, centers.row(c))));
    }
}

fn objective_of(costs: &[f64], labels: &[usize], k: usize) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| costs[i * k + l])
        .sum()
}

/// Greedy D² seeding: the first center is uniform; each further center is
/// the best of `2 + ⌊ln K⌋` candidates drawn with probability proportional
/// to the squared distance to the nearest chosen center, "best" meaning the
/// smallest total squared distance after adding it.
fn seed_centers(points: &Rows, k: usize, rng: &mut RngStream) -> Rows {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Rows::zeros(k, points.dim);
    let mut chosen = vec![false; n];
    let first = rng.below(n);
    chosen[first] = true;
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| dist2(points.row(i), points.row(first)))
        .collect();
    let mut candidate_dist = vec![0.0; n];
    let mut best_dist = vec![0.0; n];
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut best: Option<(f64, usize)> = None;
            for _ in 0..trials {
                let candidate = draw_proportional(&nearest, rng.uniform() * total);
                let q = points.row(candidate);
                let mut potential = 0.0;
                for (i, d) in candidate_dist.iter_mut().enumerate() {
                    *d = nearest[i].min(dist2(points.row(i), q));
                    potential += *d;
                }
                if best.is_none_or(|(p, _)| potential < p) {
                    best = Some((potential, candidate));
                    std::mem::swap(&mut best_dist, &mut candidate_dist);
                }
            }
            std::mem::swap(&mut nearest, &mut best_dist);
            best.expect("at least one trial").1
        } else {
            // every remaining point coincides with a center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.below(free.len())]
        };
        chosen[pick] = true;
        centers.row_mut(c).copy_from_slice(points.row(pick));
    }
    centers
}

fn draw_proportional(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 && acc > target {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).expect("positive total")
}

fn update_centers(points: &Rows, labels: &[usize], centers: &mut Rows) {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    let mut sums = Rows::zeros(k, points.dim);
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, p) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
            *s += p;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / count as f64;
            }
        }
    }
}

/// One run of k-means with `ξ ≤ |B_k| ≤ ζ`, the assignment step solved as a
/// minimum-cost flow on costs quantized by [`crate::mcf::COST_SCALE`].
pub fn constrained_kmeans(
    points: &DMatrix<f64>,
    k: usize,
    xi: usize,
    zeta: usize,
    max_iter: usize,
    rng: &mut RngStream,
) -> Result<KMeansOutcome> {
    let n = points.nrows();
    if k == 0 || xi > zeta || xi * k > n || zeta * k < n {
        return Err(Error::InfeasibleConstraints {
            k,
            xi,
            zeta,
            d_x: n,
        });
    }
    let rows = Rows::from_matrix(points);
    let mut centers = seed_centers(&rows, k, rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut objective = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut costs = Vec::with_capacity(n * k);

    while iterations < max_iter {
        iterations += 1;
        squared_distances(&rows, &centers, &mut costs);
        let (new_labels, _) = solve_assignment(&quantize_costs(&costs), n, k, xi, zeta)?;
        let new_objective = objective_of(&costs, &new_labels, k);
        if !labels.is_empty() {
            let old_objective = objective_of(&costs, &labels, k);
            // integer rounding can make the flow optimum marginally worse in
            // real terms; keep the previous assignment then
            if new_labels == labels || new_objective >= old_objective {
                converged = true;
                objective = old_objective;
                break;
            }
        }
        labels = new_labels;
        objective = new_objective;
        trace.push(objective);

        update_centers(&rows, &labels, &mut centers);
        squared_distances(&rows, &centers, &mut costs);
        objective = objective_of(&costs, &labels, k);
        trace.push(objective);
    }

    Ok(KMeansOutcome {
        partition: Partition::from_labels(&labels, k)?,
        labels,
        objective,
        iterations,
        converged,
        objective_trace: trace,
    })
}

#[derive(Debug, Clone)]
pub struct CscOutcome {
    pub partition: Partition,
    pub objective: f64,
    pub converged: bool,
}

/// Constrained spectral clustering of the state variables into `K` blocks of
/// size at most `ζ` (and at least 1). Keeps the lowest-objective restart.
pub fn csc(
    omega: &SymMatrix,
    k: usize,
    zeta: usize,
    options: KMeansOptions,
    rng: &mut RngStream,
) -> Result<CscOutcome> {
    let n = omega.dim();
    let zeta = zeta.min(n);
    if k == 0 || k > n || zeta * k < n {
        return Err(Error::InfeasibleConstraints {
            k,
            xi: 1,
            zeta,
            d_x: n,
        });
    }
    if k == 1 {
        return Ok(CscOutcome {
            partition: Partition::single_block(n),
            objective: 0.0,
            converged: true,
        });
    }
    let embedding = spectral_embed(omega, k)?;
    let mut best: Option<KMeansOutcome> = None;
    for r in 0..options.restarts.max(1) {
        let mut sub = rng.fork(&format!("kmeans-restart-{r}"));
        let run = constrained_kmeans(&embedding.points, k, 1, zeta, options.max_iter, &mut sub)?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(CscOutcome {
        partition: best.partition,
        objective: best.objective,
        converged: best.converged,
    })
}
