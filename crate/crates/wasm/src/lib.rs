//! Browser bindings: clustering a particle covariance and comparing filters
//! on a small linear Gaussian model.

use blockpf::filters::{run_filter, FilterKind};
use blockpf::harness::simulate;
use blockpf::metrics::{ari, mean_squared_error};
use blockpf::models::{LinearGaussianModel, NoiseCovSpec, StateSpaceModel};
use blockpf::nalgebra::DMatrix;
use blockpf::partitioning::{csc, sample_covariance, similarity_from_cov, KMeansOptions};
use blockpf::{Error, Partition, RngStream};
use wasm_bindgen::prelude::*;

/// Block sizes of the demo model.
pub const DEMO_BLOCKS: [usize; 5] = [8, 6, 10, 7, 9];

fn demo_model(l: f64) -> Result<LinearGaussianModel, Error> {
    let noise = NoiseCovSpec::BlockDiagonalSe {
        l,
        block_sizes: DEMO_BLOCKS.to_vec(),
    };
    LinearGaussianModel::identity_benchmark(DEMO_BLOCKS.iter().sum(), &noise)
}

/// Similarity matrix of a particle cloud and the blocks found in it.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ClusteringView {
    dim: usize,
    similarity: Vec<f64>,
    labels: Vec<u32>,
    known_labels: Vec<u32>,
    ari: f64,
}

#[wasm_bindgen]
impl ClusteringView {
    #[wasm_bindgen(getter)]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `dim × dim` absolute correlations.
    #[wasm_bindgen(getter)]
    pub fn similarity(&self) -> Vec<f64> {
        self.similarity.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn known_labels(&self) -> Vec<u32> {
        self.known_labels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn ari(&self) -> f64 {
        self.ari
    }
}

/// Draws `n_particles` one-step predictions, estimates their correlation and
/// clusters it into `k` blocks of size at most `zeta`.
pub fn cluster_particles(
    l: f64,
    n_particles: usize,
    k: usize,
    zeta: usize,
    seed: u64,
) -> Result<ClusteringView, Error> {
    let model = demo_model(l)?;
    let d_x = model.state_dim();
    let mut rng = RngStream::new(seed, 0);
    let mut x0 = vec![0.0; d_x];
    let mut x1 = vec![0.0; d_x];
    let mut particles = DMatrix::zeros(d_x, n_particles.max(2));
    for j in 0..particles.ncols() {
        model.sample_initial(&mut rng, &mut x0);
        model.sample_transition(1, &x0, &mut x1, &mut rng);
        particles.column_mut(j).copy_from_slice(&x1);
    }
    let (omega, _) = similarity_from_cov(&sample_covariance(&particles)?);
    let found = csc(&omega, k, zeta, KMeansOptions::default(), &mut rng)?.partition;
    let known = model.known_partition(1, DEMO_BLOCKS.len())?;
    let to_u32 = |p: &Partition| p.canonical().labels().into_iter().map(|l| l as u32).collect();
    Ok(ClusteringView {
        dim: d_x,
        similarity: omega.as_matrix().transpose().as_slice().to_vec(),
        labels: to_u32(&found),
        known_labels: to_u32(&known),
        ari: ari(&found, &known)?,
    })
}

/// Mean squared error of the adaptive filter (γ = 1.5) for each `K`,
/// averaged over `runs` simulated trajectories.
pub fn mse_by_k(
    l: f64,
    n_particles: usize,
    ks: &[usize],
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>, Error> {
    let model = demo_model(l)?;
    let mut totals = vec![0.0; ks.len()];
    for r in 0..runs.max(1) {
        let traj = simulate(&model, horizon, &mut RngStream::for_role(seed, r as u64, "data"));
        for (total, &k) in totals.iter_mut().zip(ks) {
            let kind = FilterKind::BpfAdaptive {
                k,
                zeta: None,
                gamma: Some(1.5),
                repartition_once: false,
            };
            let mut rng = RngStream::for_role(seed, r as u64, &format!("k{k}"));
            let steps = run_filter(&kind, &model, &traj.observations, n_particles, &mut rng, false)?;
            *total += steps
                .iter()
                .zip(&traj.states)
                .map(|(s, x)| mean_squared_error(&s.estimate, x))
                .sum::<f64>()
                / horizon as f64;
        }
    }
    Ok(totals.into_iter().map(|t| t / runs.max(1) as f64).collect())
}

/// Truth and filter estimates of one state component along one trajectory.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Track {
    truth: Vec<f64>,
    kalman: Vec<f64>,
    bootstrap: Vec<f64>,
    adaptive: Vec<f64>,
}

#[wasm_bindgen]
impl Track {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn kalman(&self) -> Vec<f64> {
        self.kalman.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn bootstrap(&self) -> Vec<f64> {
        self.bootstrap.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn adaptive(&self) -> Vec<f64> {
        self.adaptive.clone()
    }
}

pub fn track_component(
    l: f64,
    n_particles: usize,
    k: usize,
    component: usize,
    horizon: usize,
    seed: u64,
) -> Result<Track, Error> {
    let model = demo_model(l)?;
    let d_x = model.state_dim();
    if component >= d_x {
        return Err(Error::DimensionMismatch {
            expected: d_x,
            got: component,
            context: "component index",
        });
    }
    let traj = simulate(&model, horizon, &mut RngStream::for_role(seed, 0, "data"));
    let series = |kind: FilterKind, tag: &str| -> Result<Vec<f64>, Error> {
        let mut rng = RngStream::for_role(seed, 0, tag);
        Ok(run_filter(&kind, &model, &traj.observations, n_particles, &mut rng, false)?
            .into_iter()
            .map(|s| s.estimate[component])
            .collect())
    };
    Ok(Track {
        kalman: series(FilterKind::Kf, "kf")?,
        bootstrap: series(FilterKind::Bootstrap, "bootstrap")?,
        adaptive: series(
            FilterKind::BpfAdaptive {
                k,
                zeta: None,
                gamma: Some(1.5),
                repartition_once: false,
            },
            "adaptive",
        )?,
        truth: traj.states.iter().map(|x| x[component]).collect(),
    })
}

fn js_error(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = clusterParticles)]
pub fn cluster_particles_js(
    l: f64,
    n_particles: usize,
    k: usize,
    zeta: usize,
    seed: u64,
) -> Result<ClusteringView, JsError> {
    cluster_particles(l, n_particles, k, zeta, seed).map_err(js_error)
}

#[wasm_bindgen(js_name = mseByK)]
pub fn mse_by_k_js(
    l: f64,
    n_particles: usize,
    ks: Vec<u32>,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let ks: Vec<usize> = ks.into_iter().map(|k| k as usize).collect();
    mse_by_k(l, n_particles, &ks, runs, horizon, seed).map_err(js_error)
}

#[wasm_bindgen(js_name = trackComponent)]
pub fn track_component_js(
    l: f64,
    n_particles: usize,
    k: usize,
    component: usize,
    horizon: usize,
    seed: u64,
) -> Result<Track, JsError> {
    track_component(l, n_particles, k, component, horizon, seed).map_err(js_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustering_finds_the_demo_blocks() {
        let view = cluster_particles(30.0, 400, 5, 15, 1).unwrap();
        assert_eq!(view.dim, 40);
        assert_eq!(view.similarity.len(), 1600);
        assert_eq!(view.ari, 1.0);
        assert_eq!(view.labels, view.known_labels);
    }

    #[test]
    fn mse_curve_has_one_value_per_k() {
        let curve = mse_by_k(30.0, 50, &[1, 5, 10], 1, 5, 2).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn track_lengths_match_horizon() {
        let t = track_component(30.0, 60, 5, 3, 8, 3).unwrap();
        for s in [&t.truth, &t.kalman, &t.bootstrap, &t.adaptive] {
            assert_eq!(s.len(), 8);
        }
        assert!(track_component(30.0, 60, 5, 40, 8, 3).is_err());
    }
}
