//! Block particle filter: joint prediction, per-block weighting and
//! per-block resampling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::filters::resample::systematic_resample;
use crate::models::StateSpaceModel;
use crate::partition::Partition;
use crate::partitioning::{csc, similarity_from_cov, sample_covariance, KMeansOptions};
use crate::rng::RngStream;

/// Particles stored column-wise (`d_x × N_p`) with the weights of the last
/// correction step, one row per block.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: DMatrix<f64>,
    spare: DMatrix<f64>,
    block_weights: Vec<Vec<f64>>,
    degenerate: Vec<bool>,
    partition: Partition,
}

impl ParticleEnsemble {
    /// `n_particles` draws from the model's initial distribution, uniform
    /// weights, one block.
    pub fn from_prior(
        model: &dyn StateSpaceModel,
        n_particles: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::EmptyInput);
        }
        let d_x = model.state_dim();
        let mut particles = DMatrix::zeros(d_x, n_particles);
        for mut col in particles.column_iter_mut() {
            model.sample_initial(rng, col.as_mut_slice());
        }
        Self::from_particles(particles)
    }

    pub fn from_particles(particles: DMatrix<f64>) -> Result<Self> {
        let (d_x, n_p) = particles.shape();
        if d_x == 0 || n_p == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            spare: DMatrix::zeros(d_x, n_p),
            block_weights: vec![vec![1.0 / n_p as f64; n_p]],
            degenerate: vec![false],
            partition: Partition::single_block(d_x),
            particles,
        })
    }

    pub fn particles(&self) -> &DMatrix<f64> {
        &self.particles
    }

    pub fn dim(&self) -> usize {
        self.particles.nrows()
    }

    pub fn len(&self) -> usize {
        self.particles.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.ncols() == 0
    }

    /// Normalized weights per block from the last correction, before
    /// resampling.
    pub fn block_weights(&self) -> &[Vec<f64>] {
        &self.block_weights
    }

    /// Blocks whose weights collapsed in the last correction.
    pub fn degenerate_blocks(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Weighted mean under the stored block weights.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (block, w) in self.partition.blocks().iter().zip(&self.block_weights) {
            for &n in block {
                out[n] = weighted_row_mean(&self.particles, n, w);
            }
        }
        out
    }

    /// Propagates every particle through the transition kernel.
    pub fn predict(&mut self, model: &dyn StateSpaceModel, t: usize, rng: &mut RngStream) {
        for i in 0..self.len() {
            model.sample_transition(
                t,
                self.particles.column(i).as_slice(),
                self.spare.column_mut(i).as_mut_slice(),
                rng,
            );
        }
        std::mem::swap(&mut self.particles, &mut self.spare);
    }

    /// Weights each block with its own likelihood factors, forms the
    /// estimate and resamples each block with an independent offset.
    pub fn correct(
        &mut self,
        partition: &Partition,
        y: &[f64],
        model: &dyn StateSpaceModel,
        rng: &mut RngStream,
    ) -> Result<StepReport> {
        let d_x = self.dim();
        let n_p = self.len();
        if partition.dim() != d_x {
            return Err(Error::DimensionMismatch {
                expected: d_x,
                got: partition.dim(),
                context: "partition",
            });
        }
        let observed: Vec<bool> = (0..d_x)
            .map(|n| model.observed_index_of(n).is_some())
            .collect();

        self.block_weights.clear();
        self.degenerate.clear();
        let mut estimate = vec![0.0; d_x];
        let mut degenerate_blocks = 0;
        for block in partition.blocks() {
            let mut log_w = vec![0.0; n_p];
            for &n in block.iter().filter(|&&n| observed[n]) {
                for (i, lw) in log_w.iter_mut().enumerate() {
                    *lw += model.log_likelihood_factor(n, y, self.particles[(n, i)]);
                }
            }
            let (weights, degenerate) = normalize_log_weights(&log_w);
            if degenerate {
                degenerate_blocks += 1;
                log::debug!("degenerate block weights; resetting to uniform");
            }
            for &n in block {
                estimate[n] = weighted_row_mean(&self.particles, n, &weights);
            }
            let indices = systematic_resample(&weights, rng)?;
            for &n in block {
                for (i, &src) in indices.iter().enumerate() {
                    self.spare[(n, i)] = self.particles[(n, src)];
                }
            }
            self.block_weights.push(weights);
            self.degenerate.push(degenerate);
        }
        std::mem::swap(&mut self.particles, &mut self.spare);
        self.partition = partition.clone();
        Ok(StepReport {
            estimate,
            degenerate_blocks,
        })
    }
}

fn weighted_row_mean(particles: &DMatrix<f64>, n: usize, weights: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * particles[(n, i)])
        .sum()
}

/// Log-sum-exp normalization. Returns uniform weights and `true` when no
/// weight is finite.
pub fn normalize_log_weights(log_w: &[f64]) -> (Vec<f64>, bool) {
    let n = log_w.len();
    let max = log_w
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return (vec![1.0 / n as f64; n], true);
    }
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { (v - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    (w, false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Posterior mean estimate, before resampling.
    pub estimate: Vec<f64>,
    pub degenerate_blocks: usize,
}

/// One block particle filter step with a fixed partition.
pub fn bpf_step(
    ensemble: &mut ParticleEnsemble,
    partition: &Partition,
    t: usize,
    y: &[f64],
    model: &dyn StateSpaceModel,
    rng: &mut RngStream,
) -> Result<StepReport> {
    ensemble.predict(model, t, rng);
    ensemble.correct(partition, y, model, rng)
}

/// Bootstrap particle filter step: the block filter with a single block.
pub fn bootstrap_pf_step(
    ensemble: &mut ParticleEnsemble,
    t: usize,
    y: &[f64],
    model: &dyn StateSpaceModel,
    rng: &mut RngStream,
) -> Result<StepReport> {
    let single = Partition::single_block(ensemble.dim());
    bpf_step(ensemble, &single, t, y, model, rng)
}

/// Partitioning settings and memory of the adaptive filter.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    pub k: usize,
    pub zeta: usize,
    /// Recompute the partition every step; otherwise only at the first step.
    pub repartition: bool,
    pub options: KMeansOptions,
    pub current: Option<Partition>,
    /// Steps where clustering failed and the previous partition was reused.
    pub fallbacks: usize,
}

impl AdaptiveState {
    pub fn new(k: usize, zeta: usize, repartition: bool, d_x: usize) -> Result<Self> {
        if k == 0 || k > d_x {
            return Err(Error::InvalidK {
                k,
                d_x,
                reason: "need 1 <= K <= d_x",
            });
        }
        if zeta.min(d_x) * k < d_x {
            return Err(Error::InfeasibleConstraints {
                k,
                xi: 1,
                zeta,
                d_x,
            });
        }
        Ok(Self {
            k,
            zeta,
            repartition,
            options: KMeansOptions::default(),
            current: None,
            fallbacks: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveReport {
    pub step: StepReport,
    pub partition_used: Partition,
}

/// Predicts, partitions the state from the correlation of the predicted
/// particles, then corrects block-wise with that partition.
pub fn adaptive_bpf_step(
    ensemble: &mut ParticleEnsemble,
    t: usize,
    y: &[f64],
    model: &dyn StateSpaceModel,
    state: &mut AdaptiveState,
    rng: &mut RngStream,
) -> Result<AdaptiveReport> {
    ensemble.predict(model, t, rng);
    let d_x = ensemble.dim();
    let partition = if state.k == 1 {
        Partition::single_block(d_x)
    } else if state.current.is_some() && !state.repartition {
        state.current.clone().expect("checked")
    } else {
        match partition_from_particles(ensemble.particles(), state, rng) {
            Ok(p) => p,
            Err(err) => match &state.current {
                Some(previous) => {
                    log::warn!("clustering failed at t={t} ({err}); keeping previous partition");
                    state.fallbacks += 1;
                    previous.clone()
                }
                None => return Err(err),
            },
        }
    };
    state.current = Some(partition.clone());
    let step = ensemble.correct(&partition, y, model, rng)?;
    Ok(AdaptiveReport {
        step,
        partition_used: partition,
    })
}

/// Correlation magnitude of the particle cloud clustered into `K` blocks.
pub fn partition_from_particles(
    particles: &DMatrix<f64>,
    state: &AdaptiveState,
    rng: &mut RngStream,
) -> Result<Partition> {
    let cov = sample_covariance(particles)?;
    let (omega, _) = similarity_from_cov(&cov);
    let mut sub = rng.fork("csc");
    Ok(csc(&omega, state.k, state.zeta, state.options, &mut sub)?.partition)
}
