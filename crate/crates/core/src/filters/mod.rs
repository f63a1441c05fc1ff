//! Kalman filter, bootstrap particle filter, block particle filter with a
//! fixed partition and the adaptive block particle filter.

mod bpf;
mod kalman;
mod resample;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use bpf::{
    adaptive_bpf_step, bootstrap_pf_step, bpf_step, normalize_log_weights,
    partition_from_particles, AdaptiveReport, AdaptiveState, ParticleEnsemble, StepReport,
};
pub use kalman::{kalman_step, GaussianBelief};
pub use resample::{systematic_resample, systematic_resample_with_offset};

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::partition::{make_partition, Partition, PartitionScheme};
use crate::rng::RngStream;

/// Which filter to run and how it partitions the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum FilterKind {
    Kf,
    Bootstrap,
    BpfKnown {
        k: usize,
    },
    /// Fresh random partition at every step.
    BpfRandom {
        k: usize,
    },
    BpfBad {
        k: usize,
    },
    BpfAdaptive {
        k: usize,
        /// Maximum block size. Ignored when `gamma` is set.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<usize>,
        /// Block size bound as a multiple of the average block size `d_x/K`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default)]
        repartition_once: bool,
    },
}

impl FilterKind {
    /// Number of blocks; 0 for the Kalman filter.
    pub fn k(&self) -> usize {
        match self {
            FilterKind::Kf => 0,
            FilterKind::Bootstrap => 1,
            FilterKind::BpfKnown { k }
            | FilterKind::BpfRandom { k }
            | FilterKind::BpfBad { k }
            | FilterKind::BpfAdaptive { k, .. } => *k,
        }
    }

    /// Block size bound in effect: `⌈γ·d_x/K⌉` if `gamma` is given, else the
    /// explicit `zeta`, else `d_x`. 0 for the Kalman filter.
    pub fn zeta(&self, d_x: usize) -> usize {
        match self {
            FilterKind::Kf => 0,
            FilterKind::BpfAdaptive { k, zeta, gamma, .. } => match (gamma, zeta) {
                (Some(g), _) => zeta_guideline(*g, d_x, *k),
                (None, Some(z)) => (*z).min(d_x),
                (None, None) => d_x,
            },
            _ => d_x,
        }
    }

    pub fn validate(&self, d_x: usize) -> Result<()> {
        let k = self.k();
        if !matches!(self, FilterKind::Kf) && (k == 0 || k > d_x) {
            return Err(Error::InvalidK {
                k,
                d_x,
                reason: "need 1 <= K <= d_x",
            });
        }
        if let FilterKind::BpfAdaptive { gamma: Some(g), .. } = self {
            if !(*g >= 1.0) {
                return Err(Error::InvalidSpec(format!("gamma must be >= 1, got {g}")));
            }
        }
        if let FilterKind::BpfAdaptive { .. } = self {
            if self.zeta(d_x) * k < d_x {
                return Err(Error::InfeasibleConstraints {
                    k,
                    xi: 1,
                    zeta: self.zeta(d_x),
                    d_x,
                });
            }
        }
        Ok(())
    }
}

/// `⌈γ·d_x/K⌉`, clamped to `d_x`.
pub fn zeta_guideline(gamma: f64, d_x: usize, k: usize) -> usize {
    let z = (gamma * d_x as f64 / k as f64 - 1e-9).ceil() as usize;
    z.clamp(1, d_x)
}

/// Output of one filter at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub estimate: Vec<f64>,
    pub partition: Option<Partition>,
    pub degenerate_blocks: usize,
    pub wall_ms: f64,
}

/// Filters the observation sequence `observations[t-1]`, `t = 1..=T`.
///
/// `wall_ms` is measured only when `record_timing` is set and is 0 otherwise.
pub fn run_filter(
    kind: &FilterKind,
    model: &dyn StateSpaceModel,
    observations: &[Vec<f64>],
    n_particles: usize,
    rng: &mut RngStream,
    record_timing: bool,
) -> Result<Vec<FilterStep>> {
    let d_x = model.state_dim();
    kind.validate(d_x)?;
    let timer = Timer::new(record_timing);
    if let FilterKind::Kf = kind {
        return run_kalman(model, observations, timer);
    }

    let mut ensemble = ParticleEnsemble::from_prior(model, n_particles, rng)?;
    let mut adaptive = match kind {
        FilterKind::BpfAdaptive {
            k,
            repartition_once,
            ..
        } => Some(AdaptiveState::new(*k, kind.zeta(d_x), !repartition_once, d_x)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(observations.len());
    for (idx, y) in observations.iter().enumerate() {
        let t = idx + 1;
        let start = timer.start();
        let (report, partition) = match kind {
            FilterKind::Kf => unreachable!("handled above"),
            FilterKind::Bootstrap => (bootstrap_pf_step(&mut ensemble, t, y, model, rng)?, None),
            FilterKind::BpfAdaptive { .. } => {
                let state = adaptive.as_mut().expect("adaptive state");
                let r = adaptive_bpf_step(&mut ensemble, t, y, model, state, rng)?;
                (r.step, Some(r.partition_used))
            }
            FilterKind::BpfKnown { k } => {
                let p = model.known_partition(t, *k)?;
                (bpf_step(&mut ensemble, &p, t, y, model, rng)?, Some(p))
            }
            FilterKind::BpfBad { k } => {
                let p = make_partition(PartitionScheme::StridedBad, d_x, *k, None)?;
                (bpf_step(&mut ensemble, &p, t, y, model, rng)?, Some(p))
            }
            FilterKind::BpfRandom { k } => {
                let p = make_partition(PartitionScheme::Random, d_x, *k, Some(rng))?;
                (bpf_step(&mut ensemble, &p, t, y, model, rng)?, Some(p))
            }
        };
        out.push(FilterStep {
            estimate: report.estimate,
            partition,
            degenerate_blocks: report.degenerate_blocks,
            wall_ms: timer.elapsed_ms(start),
        });
    }
    Ok(out)
}

fn run_kalman(
    model: &dyn StateSpaceModel,
    observations: &[Vec<f64>],
    timer: Timer,
) -> Result<Vec<FilterStep>> {
    let lg = model.as_linear_gaussian().ok_or_else(|| {
        Error::InvalidSpec("the Kalman filter needs a linear Gaussian model".into())
    })?;
    let d_x = model.state_dim();
    let mut belief = GaussianBelief::new(DVector::zeros(d_x), lg.sigma0().clone())?;
    let mut out = Vec::with_capacity(observations.len());
    for (idx, y) in observations.iter().enumerate() {
        let t = idx + 1;
        let start = timer.start();
        belief = kalman_step(&belief, y, lg.f(), lg.h(), lg.q(t), lg.r())?;
        out.push(FilterStep {
            estimate: belief.mean.iter().copied().collect(),
            partition: None,
            degenerate_blocks: 0,
            wall_ms: timer.elapsed_ms(start),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Timer {
    enabled: bool,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self { enabled }
    }

    fn start(&self) -> Option<std::time::Instant> {
        self.enabled.then(std::time::Instant::now)
    }

    fn elapsed_ms(&self, start: Option<std::time::Instant>) -> f64 {
        start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_resolution() {
        let ad = |zeta, gamma| FilterKind::BpfAdaptive {
            k: 10,
            zeta,
            gamma,
            repartition_once: false,
        };
        assert_eq!(ad(None, Some(1.5)).zeta(100), 15);
        assert_eq!(ad(Some(100), Some(1.0)).zeta(100), 10);
        assert_eq!(ad(Some(12), None).zeta(100), 12);
        assert_eq!(ad(None, None).zeta(100), 100);
        assert_eq!(zeta_guideline(1.3, 100, 20), 7);
        assert_eq!(FilterKind::Bootstrap.zeta(30), 30);
        assert!(ad(Some(9), None).validate(100).is_err());
        assert!(ad(None, Some(0.5)).validate(100).is_err());
    }

    #[test]
    fn kind_json_form() {
        let k: FilterKind =
            serde_json::from_str(r#"{"scheme":"bpf_adaptive","k":10,"gamma":1.5}"#).unwrap();
        assert_eq!(
            k,
            FilterKind::BpfAdaptive {
                k: 10,
                zeta: None,
                gamma: Some(1.5),
                repartition_once: false
            }
        );
        let k: FilterKind = serde_json::from_str(r#"{"scheme":"kf"}"#).unwrap();
        assert_eq!(k, FilterKind::Kf);
    }
}
