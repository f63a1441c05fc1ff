//! Monte Carlo campaigns: simulate, filter, score, aggregate.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filters::{run_filter, FilterKind, FilterStep};
use crate::harness::config::{ExperimentConfig, FilterSpec, Mode};
use crate::metrics::{ari, bias_variance, mean_and_stderr, mean_squared_error};
use crate::models::StateSpaceModel;
use crate::rng::RngStream;

/// Simulated truth `x_1..x_T` and observations `y_1..y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
}

pub fn simulate(model: &dyn StateSpaceModel, horizon: usize, rng: &mut RngStream) -> Trajectory {
    let d_x = model.state_dim();
    let mut x = vec![0.0; d_x];
    model.sample_initial(rng, &mut x);
    let mut states = Vec::with_capacity(horizon);
    let mut observations = Vec::with_capacity(horizon);
    let mut next = vec![0.0; d_x];
    for t in 1..=horizon {
        model.sample_transition(t, &x, &mut next, rng);
        std::mem::swap(&mut x, &mut next);
        observations.push(model.sample_observation(t, &x, rng));
        states.push(x.clone());
    }
    Trajectory {
        states,
        observations,
    }
}

/// Stream used to simulate run `run`.
pub fn data_stream(master_seed: u64, run: usize) -> RngStream {
    RngStream::for_role(master_seed, run as u64, "data")
}

/// Stream used by filter `name` on run `run`, replicate `replicate`.
pub fn filter_stream(master_seed: u64, run: usize, name: &str, replicate: Option<usize>) -> RngStream {
    match replicate {
        None => RngStream::for_role(master_seed, run as u64, name),
        Some(m) => RngStream::for_role(master_seed, run as u64, &format!("{name}#{m}")),
    }
}

/// One filter at one time step of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub run_id: usize,
    pub t: usize,
    pub filter_name: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub zeta: usize,
    pub mse: f64,
    pub ari: f64,
    pub degenerate_blocks: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: usize,
    pub filter_name: String,
    pub status: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub filter_name: String,
    pub k: usize,
    pub zeta: usize,
    pub n_particles: usize,
    /// Runs that completed and enter the aggregates.
    pub n_runs: usize,
    pub horizon: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub ari_mean: f64,
    pub ari_stderr: f64,
    pub degenerate_block_rate: f64,
    pub mean_wall_ms: f64,
}

/// ARI of the partition used at the last time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalAriRow {
    pub filter_name: String,
    pub ari_final_mean: f64,
    pub ari_final_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasVarianceRow {
    pub filter_name: String,
    pub k: usize,
    pub zeta: usize,
    pub n_particles: usize,
    pub n_runs: usize,
    pub replicates: usize,
    pub bias_sq_mean: f64,
    pub bias_sq_stderr: f64,
    pub variance_mean: f64,
    pub variance_stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub summary: Vec<SummaryRow>,
    pub steps: Vec<StepRow>,
    pub runs: Vec<RunStatus>,
    pub final_ari: Vec<FinalAriRow>,
    pub bias_variance: Vec<BiasVarianceRow>,
}

/// Number of worker threads: the explicit value, else `BPF_THREADS`, else
/// the rayon default.
pub fn resolve_threads(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| {
        std::env::var("BPF_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    })
}

/// Runs the whole campaign. Runs are distributed over `threads` workers and
/// merged in run order; the output does not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutput> {
    config.validate()?;
    let model = config.model.build()?;
    let d_x = model.state_dim();
    let adaptive = config
        .filters
        .iter()
        .any(|f| matches!(f.kind, FilterKind::BpfAdaptive { .. }));
    if adaptive && config.n_particles < 3 * d_x {
        log::warn!(
            "N_p = {} < 3·d_x = {}: the particle covariance behind adaptive partitioning will be noisy",
            config.n_particles,
            3 * d_x
        );
    }
    let runs: Vec<usize> = (0..config.n_runs).collect();
    let per_run = |r: usize| match config.mode {
        Mode::Mse => RunResult::Mse(run_mse(config, model.as_ref(), r)),
        Mode::BiasVariance => RunResult::BiasVariance(run_bias_variance(config, model.as_ref(), r)),
    };
    let results = map_runs(&runs, threads, per_run)?;
    Ok(match config.mode {
        Mode::Mse => aggregate_mse(config, model.as_ref(), results),
        Mode::BiasVariance => aggregate_bias_variance(config, results),
    })
}

#[cfg(feature = "parallel")]
fn map_runs<T: Send>(
    runs: &[usize],
    threads: Option<usize>,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Result<Vec<T>> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| crate::error::Error::InvalidSpec(format!("thread pool: {e}")))?;
    Ok(pool.install(|| runs.par_iter().map(|&r| f(r)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn map_runs<T: Send>(
    runs: &[usize],
    _threads: Option<usize>,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Result<Vec<T>> {
    Ok(runs.iter().map(|&r| f(r)).collect())
}

enum RunResult {
    Mse(Vec<FilterRun>),
    BiasVariance(Vec<ReplicateRun>),
}

struct FilterRun {
    rows: Result<Vec<StepRow>>,
    final_ari: f64,
}

struct ReplicateRun {
    result: Result<(f64, f64)>,
}

fn filter_k_zeta(kind: &FilterKind, d_x: usize) -> (usize, usize) {
    (kind.k(), kind.zeta(d_x))
}

fn run_mse(config: &ExperimentConfig, model: &dyn StateSpaceModel, run: usize) -> Vec<FilterRun> {
    let data = simulate(model, config.horizon, &mut data_stream(config.master_seed, run));
    config
        .filters
        .iter()
        .map(|spec| {
            let mut rng = filter_stream(config.master_seed, run, &spec.name, None);
            match run_filter(
                &spec.kind,
                model,
                &data.observations,
                config.n_particles,
                &mut rng,
                config.record_timing,
            ) {
                Ok(steps) => {
                    let rows = score_steps(spec, model, &data, run, &steps);
                    let final_ari = rows.last().map_or(f64::NAN, |r| r.ari);
                    FilterRun {
                        rows: Ok(rows),
                        final_ari,
                    }
                }
                Err(e) => FilterRun {
                    rows: Err(e),
                    final_ari: f64::NAN,
                },
            }
        })
        .collect()
}

fn score_steps(
    spec: &FilterSpec,
    model: &dyn StateSpaceModel,
    data: &Trajectory,
    run: usize,
    steps: &[FilterStep],
) -> Vec<StepRow> {
    let (k, zeta) = filter_k_zeta(&spec.kind, model.state_dim());
    steps
        .iter()
        .enumerate()
        .map(|(idx, step)| {
            let t = idx + 1;
            let ari_value = step
                .partition
                .as_ref()
                .and_then(|p| {
                    let reference = model.known_partition(t, k).ok()?;
                    ari(p, &reference).ok()
                })
                .unwrap_or(f64::NAN);
            StepRow {
                run_id: run,
                t,
                filter_name: spec.name.clone(),
                k,
                zeta,
                mse: mean_squared_error(&step.estimate, &data.states[idx]),
                ari: ari_value,
                degenerate_blocks: step.degenerate_blocks,
                wall_ms: step.wall_ms,
            }
        })
        .collect()
}

fn aggregate_mse(
    config: &ExperimentConfig,
    model: &dyn StateSpaceModel,
    results: Vec<RunResult>,
) -> ExperimentOutput {
    let n_filters = config.filters.len();
    let mut out = ExperimentOutput::default();
    // per filter: run-level means
    let mut run_mse: Vec<Vec<f64>> = vec![Vec::new(); n_filters];
    let mut run_ari: Vec<Vec<f64>> = vec![Vec::new(); n_filters];
    let mut final_ari: Vec<Vec<f64>> = vec![Vec::new(); n_filters];
    let mut degenerate: Vec<usize> = vec![0; n_filters];
    let mut wall: Vec<f64> = vec![0.0; n_filters];
    for (run, result) in results.into_iter().enumerate() {
        let RunResult::Mse(filters) = result else {
            unreachable!("mode mismatch")
        };
        for (i, fr) in filters.into_iter().enumerate() {
            let name = config.filters[i].name.clone();
            match fr.rows {
                Ok(rows) => {
                    let n = rows.len() as f64;
                    run_mse[i].push(rows.iter().map(|r| r.mse).sum::<f64>() / n);
                    let aris: Vec<f64> = rows.iter().map(|r| r.ari).collect();
                    run_ari[i].push(mean_or_nan(&aris));
                    final_ari[i].push(fr.final_ari);
                    degenerate[i] += rows.iter().map(|r| r.degenerate_blocks).sum::<usize>();
                    wall[i] += rows.iter().map(|r| r.wall_ms).sum::<f64>();
                    out.runs.push(RunStatus {
                        run_id: run,
                        filter_name: name,
                        status: "ok".into(),
                        error: String::new(),
                    });
                    out.steps.extend(rows);
                }
                Err(e) => {
                    log::warn!("run {run}, filter {name}: {e}");
                    out.runs.push(RunStatus {
                        run_id: run,
                        filter_name: name,
                        status: "failed".into(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    let d_x = model.state_dim();
    for (i, spec) in config.filters.iter().enumerate() {
        let (k, zeta) = filter_k_zeta(&spec.kind, d_x);
        let completed = run_mse[i].len();
        let (mse_mean, mse_stderr) = mean_and_stderr(&run_mse[i]);
        let (ari_mean, ari_stderr) = mean_and_stderr(&run_ari[i]);
        let steps = (completed * config.horizon) as f64;
        let block_steps = steps * k.max(1) as f64;
        out.summary.push(SummaryRow {
            filter_name: spec.name.clone(),
            k,
            zeta,
            n_particles: config.n_particles,
            n_runs: completed,
            horizon: config.horizon,
            mse_mean,
            mse_stderr,
            ari_mean,
            ari_stderr,
            degenerate_block_rate: if matches!(spec.kind, FilterKind::Kf) || completed == 0 {
                0.0
            } else {
                degenerate[i] as f64 / block_steps
            },
            mean_wall_ms: if completed == 0 { 0.0 } else { wall[i] / steps },
        });
        let (fm, fs) = mean_and_stderr(&final_ari[i]);
        out.final_ari.push(FinalAriRow {
            filter_name: spec.name.clone(),
            ari_final_mean: fm,
            ari_final_stderr: fs,
        });
    }
    out
}

fn mean_or_nan(values: &[f64]) -> f64 {
    if values.iter().any(|v| v.is_nan()) || values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn run_bias_variance(
    config: &ExperimentConfig,
    model: &dyn StateSpaceModel,
    run: usize,
) -> Vec<ReplicateRun> {
    let data = simulate(model, config.horizon, &mut data_stream(config.master_seed, run));
    let reference = run_filter(
        &FilterKind::Kf,
        model,
        &data.observations,
        1,
        &mut filter_stream(config.master_seed, run, "kf-reference", None),
        false,
    )
    .map(|steps| steps.into_iter().map(|s| s.estimate).collect::<Vec<_>>());
    config
        .filters
        .iter()
        .map(|spec| {
            let result = reference.clone().and_then(|reference| {
                let replicates = (0..config.replicates())
                    .map(|m| {
                        let mut rng = filter_stream(config.master_seed, run, &spec.name, Some(m));
                        run_filter(
                            &spec.kind,
                            model,
                            &data.observations,
                            config.n_particles,
                            &mut rng,
                            false,
                        )
                        .map(|steps| steps.into_iter().map(|s| s.estimate).collect::<Vec<_>>())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let bv = bias_variance(&replicates, &reference)?;
                Ok((bv.bias_sq, bv.variance))
            });
            ReplicateRun { result }
        })
        .collect()
}

fn aggregate_bias_variance(config: &ExperimentConfig, results: Vec<RunResult>) -> ExperimentOutput {
    let n_filters = config.filters.len();
    let d_x = config.model.state_dim();
    let mut out = ExperimentOutput::default();
    let mut bias: Vec<Vec<f64>> = vec![Vec::new(); n_filters];
    let mut var: Vec<Vec<f64>> = vec![Vec::new(); n_filters];
    for (run, result) in results.into_iter().enumerate() {
        let RunResult::BiasVariance(filters) = result else {
            unreachable!("mode mismatch")
        };
        for (i, rr) in filters.into_iter().enumerate() {
            let name = config.filters[i].name.clone();
            let (status, error) = match rr.result {
                Ok((b, v)) => {
                    bias[i].push(b);
                    var[i].push(v);
                    ("ok", String::new())
                }
                Err(e) => ("failed", e.to_string()),
            };
            out.runs.push(RunStatus {
                run_id: run,
                filter_name: name,
                status: status.into(),
                error,
            });
        }
    }
    for (i, spec) in config.filters.iter().enumerate() {
        let (k, zeta) = filter_k_zeta(&spec.kind, d_x);
        let (bm, bs) = mean_and_stderr(&bias[i]);
        let (vm, vs) = mean_and_stderr(&var[i]);
        out.bias_variance.push(BiasVarianceRow {
            filter_name: spec.name.clone(),
            k,
            zeta,
            n_particles: config.n_particles,
            n_runs: bias[i].len(),
            replicates: config.replicates(),
            bias_sq_mean: bm,
            bias_sq_stderr: bs,
            variance_mean: vm,
            variance_stderr: vs,
        });
    }
    out
}
