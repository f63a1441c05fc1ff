//! Particle filters checked against the Kalman filter and against their own
//! sampling guarantees.

use blockpf::filters::{run_filter, systematic_resample_with_offset, FilterKind};
use blockpf::harness::simulate;
use blockpf::models::{linear_gaussian_model, LinearGaussianModel};
use blockpf::nalgebra::DMatrix;
use blockpf::{RngStream, SymMatrix};

fn diagonal_model(d: usize, a: f64, q: f64) -> LinearGaussianModel {
    linear_gaussian_model(
        DMatrix::identity(d, d) * a,
        DMatrix::identity(d, d),
        SymMatrix::scaled_identity(d, q),
        SymMatrix::identity(d),
        SymMatrix::identity(d),
    )
    .unwrap()
}

/// Squared deviations of a filter from the Kalman mean, one entry per
/// (seed, step, component).
fn squared_gaps(
    kind: &FilterKind,
    model: &LinearGaussianModel,
    n_particles: usize,
    seeds: std::ops::Range<u64>,
    horizon: usize,
) -> Vec<f64> {
    let mut gaps = Vec::new();
    for seed in seeds {
        let traj = simulate(model, horizon, &mut RngStream::new(seed, 1));
        let kf = run_filter(&FilterKind::Kf, model, &traj.observations, 1, &mut RngStream::new(0, 0), false)
            .unwrap();
        let pf = run_filter(kind, model, &traj.observations, n_particles, &mut RngStream::new(seed, 2), false)
            .unwrap();
        for (a, b) in pf.iter().zip(&kf) {
            gaps.extend(a.estimate.iter().zip(&b.estimate).map(|(x, y)| (x - y).powi(2)));
        }
    }
    gaps
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn systematic_resampling_is_unbiased() {
    let weights = [0.05, 0.3, 0.15, 0.4, 0.1];
    let n = weights.len();
    let reps = 10_000;
    let mut rng = RngStream::new(21, 0);
    let mut counts = vec![0usize; n];
    for _ in 0..reps {
        let idx = systematic_resample_with_offset(&weights, rng.uniform()).unwrap();
        assert_eq!(idx.len(), n);
        for i in idx {
            counts[i] += 1;
        }
    }
    for (c, w) in counts.iter().zip(weights) {
        let avg = *c as f64 / reps as f64;
        assert!((avg - w * n as f64).abs() < 0.02, "{avg} vs {}", w * n as f64);
    }
}

#[test]
fn error_shrinks_like_inverse_square_root() {
    let model = diagonal_model(1, 0.9, 0.5);
    let small = mean(&squared_gaps(&FilterKind::Bootstrap, &model, 100, 0..30, 20)).sqrt();
    let large = mean(&squared_gaps(&FilterKind::Bootstrap, &model, 1600, 0..30, 20)).sqrt();
    // sixteen times the particles: a quarter of the error
    let ratio = small / large;
    assert!((2.5..6.5).contains(&ratio), "{small} / {large} = {ratio}");
}

#[test]
fn singleton_blocks_behave_like_independent_scalar_filters() {
    // with independent components every singleton block is its own scalar filter
    let d = 10;
    let model = diagonal_model(d, 0.9, 0.5);
    let scalar = diagonal_model(1, 0.9, 0.5);
    let bpf = mean(&squared_gaps(&FilterKind::BpfKnown { k: d }, &model, 200, 0..10, 15));
    let bank = mean(&squared_gaps(&FilterKind::Bootstrap, &scalar, 200, 0..100, 15));
    let joint = mean(&squared_gaps(&FilterKind::Bootstrap, &model, 200, 0..10, 15));
    assert!(bpf / bank > 0.6 && bpf / bank < 1.6, "bpf {bpf}, scalar bank {bank}");
    assert!(joint > 3.0 * bpf, "joint {joint} vs blocked {bpf}");
}

#[test]
fn adaptive_singletons_match_known_singletons() {
    let d = 6;
    let model = diagonal_model(d, 0.9, 0.5);
    let traj = simulate(&model, 10, &mut RngStream::new(4, 1));
    let adaptive = FilterKind::BpfAdaptive {
        k: d,
        zeta: Some(1),
        gamma: None,
        repartition_once: false,
    };
    let steps = run_filter(&adaptive, &model, &traj.observations, 300, &mut RngStream::new(4, 2), false)
        .unwrap();
    for s in steps {
        let p = s.partition.unwrap();
        assert_eq!(p.block_sizes(), vec![1; d]);
    }
}
