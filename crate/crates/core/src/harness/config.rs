//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterKind;
use crate::models::{
    Lorenz96Model, Lorenz96Params, LinearGaussianModel, NoiseCovSpec, StateSpaceModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `F = H = R = Σ0 = I` with the given state-noise covariance.
    LinearGaussian { d_x: usize, noise: NoiseCovSpec },
    Lorenz96(Lorenz96Params),
}

impl ModelSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            ModelSpec::LinearGaussian { d_x, .. } => *d_x,
            ModelSpec::Lorenz96(p) => p.d_x,
        }
    }

    pub fn build(&self) -> Result<Box<dyn StateSpaceModel>> {
        Ok(match self {
            ModelSpec::LinearGaussian { d_x, noise } => {
                Box::new(LinearGaussianModel::identity_benchmark(*d_x, noise)?)
            }
            ModelSpec::Lorenz96(p) => Box::new(Lorenz96Model::new(p.clone())?),
        })
    }

    fn fixed_blocks(&self) -> Option<usize> {
        match self {
            ModelSpec::LinearGaussian {
                noise: NoiseCovSpec::BlockDiagonalSe { block_sizes, .. },
                ..
            } => Some(block_sizes.len()),
            ModelSpec::LinearGaussian {
                noise: NoiseCovSpec::TimeVaryingBlocks { block_sizes, .. },
                ..
            } => block_sizes.first().map(Vec::len),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FilterKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Score every filter against the simulated truth.
    #[default]
    Mse,
    /// Run `replicates` copies of each particle filter per data set and
    /// decompose their error against the Kalman mean.
    BiasVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub filters: Vec<FilterSpec>,
    pub n_particles: usize,
    pub n_runs: usize,
    pub horizon: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Measure per-step wall time; off by default.
    #[serde(default)]
    pub record_timing: bool,
}

pub const DEFAULT_REPLICATES: usize = 10;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ParseError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(DEFAULT_REPLICATES)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &str, message: String| Error::ValidationError {
            field: field.to_string(),
            message,
        };
        let d_x = self.model.state_dim();
        if let ModelSpec::LinearGaussian { noise, .. } = &self.model {
            noise
                .validate(d_x)
                .map_err(|e| invalid("model.noise", e.to_string()))?;
        }
        self.model
            .build()
            .map_err(|e| invalid("model", e.to_string()))?;
        for (field, value) in [
            ("n_particles", self.n_particles),
            ("n_runs", self.n_runs),
            ("horizon", self.horizon),
        ] {
            if value == 0 {
                return Err(invalid(field, "must be at least 1".into()));
            }
        }
        if self.filters.is_empty() {
            return Err(invalid("filters", "no filter configured".into()));
        }
        if self.mode == Mode::BiasVariance && self.replicates() < 2 {
            return Err(invalid("replicates", "need at least 2 replicates".into()));
        }
        let linear = matches!(self.model, ModelSpec::LinearGaussian { .. });
        if self.mode == Mode::BiasVariance && !linear {
            return Err(invalid(
                "mode",
                "bias/variance needs the Kalman reference of a linear Gaussian model".into(),
            ));
        }
        for (i, f) in self.filters.iter().enumerate() {
            let field = format!("filters[{i}]");
            if f.name.is_empty() {
                return Err(invalid(&format!("{field}.name"), "empty filter name".into()));
            }
            if self.filters[..i].iter().any(|g| g.name == f.name) {
                return Err(invalid(
                    &format!("{field}.name"),
                    format!("duplicate filter name {:?}", f.name),
                ));
            }
            if matches!(f.kind, FilterKind::Kf) && !linear {
                return Err(invalid(
                    &format!("{field}.scheme"),
                    "kf needs a linear Gaussian model".into(),
                ));
            }
            f.kind
                .validate(d_x)
                .map_err(|e| invalid(&format!("{field}.k"), e.to_string()))?;
            let k = f.kind.k();
            let needs_divisor = matches!(f.kind, FilterKind::BpfBad { .. })
                || (matches!(f.kind, FilterKind::BpfKnown { .. }) && self.model.fixed_blocks().is_none());
            if needs_divisor && d_x % k != 0 {
                return Err(invalid(
                    &format!("{field}.k"),
                    format!("K={k} must divide d_x={d_x} for this scheme"),
                ));
            }
            if let (FilterKind::BpfKnown { .. }, Some(blocks)) = (&f.kind, self.model.fixed_blocks()) {
                if k != blocks {
                    return Err(invalid(
                        &format!("{field}.k"),
                        format!("the model has {blocks} noise blocks, got K={k}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Copy with every default made explicit: the block size bound of each
    /// adaptive filter is written as `zeta` and the replicate count is set.
    pub fn resolved(&self) -> ExperimentConfig {
        let d_x = self.model.state_dim();
        let mut out = self.clone();
        for f in &mut out.filters {
            let resolved = f.kind.zeta(d_x);
            if let FilterKind::BpfAdaptive { zeta, gamma, .. } = &mut f.kind {
                *zeta = Some(resolved);
                *gamma = None;
            }
        }
        if out.mode == Mode::BiasVariance {
            out.replicates = Some(self.replicates());
        }
        out
    }
}
