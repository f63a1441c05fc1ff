//! Experiment orchestration: configuration, seeded Monte Carlo campaigns
//! and CSV output.

mod config;
mod output;
mod recipes;
mod run;

pub use config::{ExperimentConfig, FilterSpec, Mode, ModelSpec, DEFAULT_REPLICATES};
pub use output::{
    bias_variance_to_csv, final_ari_to_csv, format_g, runs_to_csv, steps_from_csv, steps_to_csv,
    summary_from_csv, summary_to_csv, write_outputs, BIAS_VARIANCE_HEADER, SUMMARY_HEADER,
};
pub use recipes::{recipe, RECIPES};
pub use run::{
    data_stream, filter_stream, resolve_threads, run_experiment, simulate, BiasVarianceRow,
    ExperimentOutput, FinalAriRow, RunStatus, StepRow, SummaryRow, Trajectory,
};
