//! State-space models: the generic hidden Markov model interface, the linear
//! Gaussian benchmark and the Lorenz 96 twin experiment.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, LowerTriangular, SymMatrix};
use crate::partition::{contiguous_with_sizes, make_partition, Partition, PartitionScheme};
use crate::rng::RngStream;

/// A hidden Markov model whose likelihood factorizes over state components.
///
/// Time indices start at 1 for the first transition; `sample_initial` draws
/// the state at time 0.
pub trait StateSpaceModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]);

    /// Draws `x_t` given `x_{t-1}`.
    fn sample_transition(&self, t: usize, x_prev: &[f64], out: &mut [f64], rng: &mut RngStream);

    fn sample_observation(&self, t: usize, x: &[f64], rng: &mut RngStream) -> Vec<f64>;

    /// `log α_n(y, x_n)`; zero for components without an attached observation.
    fn log_likelihood_factor(&self, n: usize, y: &[f64], x_n: f64) -> f64;

    fn observed_index_of(&self, n: usize) -> Option<usize>;

    /// The partition suggested by the model structure at time `t`.
    fn known_partition(&self, t: usize, k: usize) -> Result<Partition> {
        let _ = t;
        make_partition(PartitionScheme::ContiguousKnown, self.state_dim(), k, None)
    }

    fn as_linear_gaussian(&self) -> Option<&LinearGaussianModel> {
        None
    }

    /// Full log-likelihood, the sum of the per-component factors.
    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(n, &xn)| self.log_likelihood_factor(n, y, xn))
            .sum()
    }
}

/// State-noise covariance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseCovSpec {
    /// `scale · I`
    IdentityScaled { scale: f64 },
    /// Dense `Q(i,j) = exp(-(i-j)²/l)`.
    SquaredExponential { l: f64 },
    /// Squared-exponential entries inside consecutive diagonal blocks, zero elsewhere.
    BlockDiagonalSe { l: f64, block_sizes: Vec<usize> },
    /// Two block-diagonal regimes: `block_sizes[0]` for `t <= switch_time`,
    /// `block_sizes[1]` afterwards.
    TimeVaryingBlocks {
        l: f64,
        block_sizes: Vec<Vec<usize>>,
        switch_time: usize,
    },
}

fn squared_exponential(i: usize, j: usize, l: f64) -> f64 {
    let gap = i as f64 - j as f64;
    (-(gap * gap) / l).exp()
}

fn check_blocks(sizes: &[usize], d_x: usize) -> Result<()> {
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidSpec("block sizes must be positive".into()));
    }
    let total: usize = sizes.iter().sum();
    if total != d_x {
        return Err(Error::InvalidSpec(format!(
            "block sizes sum to {total}, expected d_x = {d_x}"
        )));
    }
    Ok(())
}

fn block_diagonal_se(sizes: &[usize], l: f64) -> SymMatrix {
    let d_x = sizes.iter().sum();
    let mut m = DMatrix::zeros(d_x, d_x);
    let mut start = 0;
    for &s in sizes {
        for i in start..start + s {
            for j in start..start + s {
                m[(i, j)] = squared_exponential(i, j, l);
            }
        }
        start += s;
    }
    SymMatrix::symmetrized(m)
}

impl NoiseCovSpec {
    /// Ten blocks on `d_x = 100` whose sizes change after `t = 25`.
    pub fn time_varying_benchmark(l: f64) -> Self {
        NoiseCovSpec::TimeVaryingBlocks {
            l,
            block_sizes: vec![
                vec![5, 9, 8, 12, 13, 7, 15, 14, 11, 6],
                vec![8, 14, 11, 15, 12, 5, 13, 9, 6, 7],
            ],
            switch_time: 25,
        }
    }

    pub fn validate(&self, d_x: usize) -> Result<()> {
        match self {
            NoiseCovSpec::IdentityScaled { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::InvalidSpec("scale must be finite and >= 0".into()));
                }
            }
            NoiseCovSpec::SquaredExponential { l } => check_length_scale(*l)?,
            NoiseCovSpec::BlockDiagonalSe { l, block_sizes } => {
                check_length_scale(*l)?;
                check_blocks(block_sizes, d_x)?;
            }
            NoiseCovSpec::TimeVaryingBlocks {
                l,
                block_sizes,
                switch_time,
            } => {
                check_length_scale(*l)?;
                if block_sizes.is_empty() || block_sizes.len() > 2 {
                    return Err(Error::InvalidSpec(
                        "time-varying blocks need one or two regimes".into(),
                    ));
                }
                if *switch_time == 0 {
                    return Err(Error::InvalidSpec("switch_time must be >= 1".into()));
                }
                for sizes in block_sizes {
                    check_blocks(sizes, d_x)?;
                }
            }
        }
        Ok(())
    }

    /// Block sizes in force at time `t`, if the covariance is block diagonal.
    pub fn block_sizes_at(&self, t: usize) -> Option<&[usize]> {
        match self {
            NoiseCovSpec::BlockDiagonalSe { block_sizes, .. } => Some(block_sizes),
            NoiseCovSpec::TimeVaryingBlocks {
                block_sizes,
                switch_time,
                ..
            } => {
                let regime = usize::from(t > *switch_time).min(block_sizes.len() - 1);
                Some(&block_sizes[regime])
            }
            _ => None,
        }
    }
}

fn check_length_scale(l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidSpec(format!("length scale must be > 0, got {l}")));
    }
    Ok(())
}

/// State-noise covariance at time `t`.
pub fn build_q(spec: &NoiseCovSpec, d_x: usize, t: usize) -> Result<SymMatrix> {
    spec.validate(d_x)?;
    Ok(match spec {
        NoiseCovSpec::IdentityScaled { scale } => SymMatrix::scaled_identity(d_x, *scale),
        NoiseCovSpec::SquaredExponential { l } => {
            SymMatrix::from_fn(d_x, |i, j| squared_exponential(i, j, *l))
        }
        NoiseCovSpec::BlockDiagonalSe { .. } | NoiseCovSpec::TimeVaryingBlocks { .. } => {
            let l = match spec {
                NoiseCovSpec::BlockDiagonalSe { l, .. }
                | NoiseCovSpec::TimeVaryingBlocks { l, .. } => *l,
                _ => unreachable!(),
            };
            block_diagonal_se(spec.block_sizes_at(t).expect("block spec"), l)
        }
    })
}

#[derive(Debug, Clone)]
struct NoiseRegime {
    cov: SymMatrix,
    chol: LowerTriangular,
    /// Standard deviation when the covariance is a multiple of the identity.
    iso_std: Option<f64>,
}

impl NoiseRegime {
    fn new(cov: SymMatrix) -> Result<Self> {
        let n = cov.dim();
        let iso_std = if cov.is_diagonal() && (1..n).all(|i| cov.get(i, i) == cov.get(0, 0)) {
            Some(cov.get(0, 0).max(0.0).sqrt())
        } else {
            None
        };
        let chol = cholesky(&cov)?;
        Ok(Self { cov, chol, iso_std })
    }
}

/// Additive Gaussian state noise with a possibly time-varying covariance.
#[derive(Debug, Clone)]
pub struct NoiseProcess {
    regimes: Vec<NoiseRegime>,
    switch_time: usize,
    spec: Option<NoiseCovSpec>,
}

impl NoiseProcess {
    pub fn from_spec(spec: &NoiseCovSpec, d_x: usize) -> Result<Self> {
        spec.validate(d_x)?;
        let (times, switch_time): (Vec<usize>, usize) = match spec {
            NoiseCovSpec::TimeVaryingBlocks {
                block_sizes,
                switch_time,
                ..
            } if block_sizes.len() == 2 => (vec![1, switch_time + 1], *switch_time),
            _ => (vec![1], usize::MAX),
        };
        let regimes = times
            .into_iter()
            .map(|t| NoiseRegime::new(build_q(spec, d_x, t)?))
            .collect::<Result<_>>()?;
        Ok(Self {
            regimes,
            switch_time,
            spec: Some(spec.clone()),
        })
    }

    pub fn fixed(cov: SymMatrix) -> Result<Self> {
        Ok(Self {
            regimes: vec![NoiseRegime::new(cov)?],
            switch_time: usize::MAX,
            spec: None,
        })
    }

    fn regime(&self, t: usize) -> &NoiseRegime {
        &self.regimes[usize::from(t > self.switch_time).min(self.regimes.len() - 1)]
    }

    pub fn covariance(&self, t: usize) -> &SymMatrix {
        &self.regime(t).cov
    }

    pub fn spec(&self) -> Option<&NoiseCovSpec> {
        self.spec.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.regimes
            .iter()
            .all(|r| r.cov.as_matrix().iter().all(|&v| v == 0.0))
    }

    /// Adds one noise draw for time `t` to `x`. `scratch` must have the state
    /// dimension.
    pub fn add_sample(&self, t: usize, x: &mut [f64], scratch: &mut [f64], rng: &mut RngStream) {
        let regime = self.regime(t);
        if let Some(std) = regime.iso_std {
            for v in x.iter_mut() {
                *v += std * rng.standard_normal();
            }
            return;
        }
        let n = x.len();
        let (z, lz) = scratch.split_at_mut(n);
        rng.fill_standard_normal(z);
        regime.chol.mul_into(z, &mut lz[..n]);
        for (v, d) in x.iter_mut().zip(lz.iter()) {
            *v += d;
        }
    }
}

/// `x_t = F x_{t-1} + w_t`, `y_t = H x_t + v_t` with diagonal `H` and `R`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    f: DMatrix<f64>,
    f_is_identity: bool,
    h: DMatrix<f64>,
    h_diag: Vec<f64>,
    noise: NoiseProcess,
    r: SymMatrix,
    r_std: Vec<f64>,
    log_norm: Vec<f64>,
    sigma0: SymMatrix,
    sigma0_chol: LowerTriangular,
}

impl LinearGaussianModel {
    pub fn new(
        f: DMatrix<f64>,
        h: DMatrix<f64>,
        noise: NoiseProcess,
        r: SymMatrix,
        sigma0: SymMatrix,
    ) -> Result<Self> {
        let d_x = f.nrows();
        let dims = [
            (f.ncols(), "F columns"),
            (h.nrows(), "H rows (d_y = d_x)"),
            (h.ncols(), "H columns"),
            (r.dim(), "R"),
            (sigma0.dim(), "Sigma0"),
            (noise.covariance(1).dim(), "Q"),
        ];
        for (got, context) in dims {
            if got != d_x {
                return Err(Error::DimensionMismatch {
                    expected: d_x,
                    got,
                    context,
                });
            }
        }
        let r_diag: Vec<f64> = (0..d_x).map(|i| r.get(i, i)).collect();
        if noise.is_zero() && r_diag.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroNoiseUnsupported);
        }
        if r_diag.iter().any(|&v| v <= 0.0) {
            return Err(Error::ZeroNoiseUnsupported);
        }
        if !r.is_diagonal() {
            return Err(Error::NonFactorizableObservation(
                "R must be diagonal".into(),
            ));
        }
        let h_is_diag = (0..d_x).all(|j| (0..d_x).all(|i| i == j || h[(i, j)] == 0.0));
        if !h_is_diag {
            return Err(Error::NonFactorizableObservation(
                "H must be diagonal".into(),
            ));
        }
        let sigma0_chol = cholesky(&sigma0)?;
        let f_is_identity = f == DMatrix::identity(d_x, d_x);
        Ok(Self {
            h_diag: (0..d_x).map(|i| h[(i, i)]).collect(),
            r_std: r_diag.iter().map(|v| v.sqrt()).collect(),
            log_norm: r_diag.iter().map(|v| -0.5 * (2.0 * PI * v).ln()).collect(),
            f,
            f_is_identity,
            h,
            noise,
            r,
            sigma0,
            sigma0_chol,
        })
    }

    /// `F = H = R = Σ0 = I` with the given state-noise covariance.
    pub fn identity_benchmark(d_x: usize, noise: &NoiseCovSpec) -> Result<Self> {
        Self::new(
            DMatrix::identity(d_x, d_x),
            DMatrix::identity(d_x, d_x),
            NoiseProcess::from_spec(noise, d_x)?,
            SymMatrix::identity(d_x),
            SymMatrix::identity(d_x),
        )
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn q(&self, t: usize) -> &SymMatrix {
        self.noise.covariance(t)
    }

    pub fn r(&self) -> &SymMatrix {
        &self.r
    }

    pub fn sigma0(&self) -> &SymMatrix {
        &self.sigma0
    }

    pub fn noise(&self) -> &NoiseProcess {
        &self.noise
    }
}

/// Convenience constructor with a time-invariant state-noise covariance.
pub fn linear_gaussian_model(
    f: DMatrix<f64>,
    h: DMatrix<f64>,
    q: SymMatrix,
    r: SymMatrix,
    sigma0: SymMatrix,
) -> Result<LinearGaussianModel> {
    LinearGaussianModel::new(f, h, NoiseProcess::fixed(q)?, r, sigma0)
}

impl StateSpaceModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        let mut z = vec![0.0; out.len()];
        rng.fill_standard_normal(&mut z);
        self.sigma0_chol.mul_into(&z, out);
    }

    fn sample_transition(&self, t: usize, x_prev: &[f64], out: &mut [f64], rng: &mut RngStream) {
        if self.f_is_identity {
            out.copy_from_slice(x_prev);
        } else {
            let fx = &self.f * DVector::from_column_slice(x_prev);
            out.copy_from_slice(fx.as_slice());
        }
        let mut scratch = vec![0.0; 2 * out.len()];
        self.noise.add_sample(t, out, &mut scratch, rng);
    }

    fn sample_observation(&self, _t: usize, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(n, &xn)| self.h_diag[n] * xn + self.r_std[n] * rng.standard_normal())
            .collect()
    }

    fn log_likelihood_factor(&self, n: usize, y: &[f64], x_n: f64) -> f64 {
        let resid = (y[n] - self.h_diag[n] * x_n) / self.r_std[n];
        self.log_norm[n] - 0.5 * resid * resid
    }

    fn observed_index_of(&self, n: usize) -> Option<usize> {
        Some(n)
    }

    fn known_partition(&self, t: usize, k: usize) -> Result<Partition> {
        match self.noise.spec().and_then(|s| s.block_sizes_at(t)) {
            Some(sizes) => contiguous_with_sizes(sizes),
            None => make_partition(PartitionScheme::ContiguousKnown, self.state_dim(), k, None),
        }
    }

    fn as_linear_gaussian(&self) -> Option<&LinearGaussianModel> {
        Some(self)
    }
}

fn lorenz96_drift_into(x: &[f64], forcing: f64, out: &mut [f64]) {
    let d = x.len();
    for n in 0..d {
        let xp1 = x[(n + 1) % d];
        let xm1 = x[(n + d - 1) % d];
        let xm2 = x[(n + d - 2) % d];
        out[n] = (xp1 - xm2) * xm1 - x[n] + forcing;
    }
}

/// Lorenz 96 right-hand side with periodic boundary conditions.
pub fn lorenz96_drift(x: &[f64], forcing: f64) -> Result<Vec<f64>> {
    if x.len() < 4 {
        return Err(Error::DimensionTooSmall(x.len()));
    }
    let mut out = vec![0.0; x.len()];
    lorenz96_drift_into(x, forcing, &mut out);
    Ok(out)
}

/// One classical fourth-order Runge–Kutta step of `dx/dt = f(x)`.
pub fn rk4_step_with(x: &[f64], dt: f64, mut f: impl FnMut(&[f64], &mut [f64])) -> Vec<f64> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// RK4 step of the Lorenz 96 flow.
pub fn rk4_step(x: &[f64], dt: f64, forcing: f64) -> Vec<f64> {
    rk4_step_with(x, dt, |s, out| lorenz96_drift_into(s, forcing, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lorenz96Params {
    pub d_x: usize,
    #[serde(default = "default_forcing")]
    pub forcing: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_lorenz_noise")]
    pub noise: NoiseCovSpec,
    #[serde(default = "default_obs_noise_var")]
    pub obs_noise_var: f64,
    #[serde(default = "default_init_var")]
    pub init_var: f64,
}

fn default_forcing() -> f64 {
    8.0
}
fn default_dt() -> f64 {
    0.05
}
fn default_lorenz_noise() -> NoiseCovSpec {
    NoiseCovSpec::IdentityScaled { scale: 0.01 }
}
fn default_obs_noise_var() -> f64 {
    1.0
}
fn default_init_var() -> f64 {
    0.01
}

impl Lorenz96Params {
    pub fn standard(d_x: usize) -> Self {
        Self {
            d_x,
            forcing: default_forcing(),
            dt: default_dt(),
            noise: default_lorenz_noise(),
            obs_noise_var: default_obs_noise_var(),
            init_var: default_init_var(),
        }
    }
}

/// Lorenz 96 with additive state noise after each RK4 step; every other
/// component (0-based even indices) is observed with Gaussian noise.
#[derive(Debug, Clone)]
pub struct Lorenz96Model {
    params: Lorenz96Params,
    noise: NoiseProcess,
    obs_std: f64,
    log_norm: f64,
    init_std: f64,
}

impl Lorenz96Model {
    pub fn new(params: Lorenz96Params) -> Result<Self> {
        let d = params.d_x;
        if d < 4 {
            return Err(Error::DimensionTooSmall(d));
        }
        if d % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "half-observed Lorenz 96 needs an even d_x, got {d}"
            )));
        }
        if !(params.obs_noise_var > 0.0 && params.obs_noise_var.is_finite()) {
            return Err(Error::InvalidSpec("obs_noise_var must be > 0".into()));
        }
        if !(params.dt > 0.0 && params.init_var >= 0.0) {
            return Err(Error::InvalidSpec("dt must be > 0 and init_var >= 0".into()));
        }
        let noise = NoiseProcess::from_spec(&params.noise, d)?;
        Ok(Self {
            obs_std: params.obs_noise_var.sqrt(),
            log_norm: -0.5 * (2.0 * PI * params.obs_noise_var).ln(),
            init_std: params.init_var.sqrt(),
            noise,
            params,
        })
    }

    pub fn params(&self) -> &Lorenz96Params {
        &self.params
    }
}

impl StateSpaceModel for Lorenz96Model {
    fn state_dim(&self) -> usize {
        self.params.d_x
    }

    fn obs_dim(&self) -> usize {
        self.params.d_x / 2
    }

    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.init_std * rng.standard_normal();
        }
    }

    fn sample_transition(&self, t: usize, x_prev: &[f64], out: &mut [f64], rng: &mut RngStream) {
        let next = rk4_step(x_prev, self.params.dt, self.params.forcing);
        out.copy_from_slice(&next);
        let mut scratch = vec![0.0; 2 * out.len()];
        self.noise.add_sample(t, out, &mut scratch, rng);
    }

    fn sample_observation(&self, _t: usize, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        (0..self.obs_dim())
            .map(|m| x[2 * m] + self.obs_std * rng.standard_normal())
            .collect()
    }

    fn log_likelihood_factor(&self, n: usize, y: &[f64], x_n: f64) -> f64 {
        match self.observed_index_of(n) {
            Some(m) => {
                let resid = (y[m] - x_n) / self.obs_std;
                self.log_norm - 0.5 * resid * resid
            }
            None => 0.0,
        }
    }

    fn observed_index_of(&self, n: usize) -> Option<usize> {
        (n % 2 == 0).then_some(n / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_exponential_entries() {
        let q = build_q(&NoiseCovSpec::SquaredExponential { l: 100.0 }, 100, 1).unwrap();
        assert!((0..100).all(|i| q.get(i, i) == 1.0));
        assert!((q.get(0, 10) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((q.get(0, 10) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn block_diagonal_zero_across_blocks() {
        let spec = NoiseCovSpec::BlockDiagonalSe {
            l: 30.0,
            block_sizes: vec![5; 20],
        };
        let q = build_q(&spec, 100, 1).unwrap();
        // 1-based (1, 6) straddles the first two blocks
        assert_eq!(q.get(0, 5), 0.0);
        assert!(q.get(0, 4) > 0.0);
    }

    #[test]
    fn time_varying_regimes_switch_after_25() {
        let spec = NoiseCovSpec::time_varying_benchmark(100.0);
        assert_eq!(spec.block_sizes_at(25).unwrap()[0], 5);
        assert_eq!(spec.block_sizes_at(26).unwrap()[0], 8);
        let q25 = build_q(&spec, 100, 25).unwrap();
        let q26 = build_q(&spec, 100, 26).unwrap();
        // indices 5 and 6 (0-based) share a block only in the second regime
        assert_eq!(q25.get(4, 5), 0.0);
        assert!(q26.get(4, 5) > 0.0);
        let noise = NoiseProcess::from_spec(&spec, 100).unwrap();
        assert_eq!(noise.covariance(25), &q25);
        assert_eq!(noise.covariance(26), &q26);
    }

    #[test]
    fn invalid_block_sizes() {
        let spec = NoiseCovSpec::BlockDiagonalSe {
            l: 1.0,
            block_sizes: vec![5, 5],
        };
        assert!(matches!(build_q(&spec, 12, 1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn zero_noise_rejected() {
        let err = linear_gaussian_model(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            SymMatrix::zeros(2),
            SymMatrix::zeros(2),
            SymMatrix::identity(2),
        );
        assert!(matches!(err, Err(Error::ZeroNoiseUnsupported)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = linear_gaussian_model(
            DMatrix::identity(3, 3),
            DMatrix::identity(2, 2),
            SymMatrix::identity(3),
            SymMatrix::identity(3),
            SymMatrix::identity(3),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn log_factor_at_mean() {
        let m = LinearGaussianModel::identity_benchmark(
            3,
            &NoiseCovSpec::IdentityScaled { scale: 1.0 },
        )
        .unwrap();
        let y = [0.3, -1.0, 2.0];
        let v = m.log_likelihood_factor(1, &y, -1.0);
        assert!((v + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn lorenz_drift_cases() {
        let eq = vec![8.0; 6];
        assert!(lorenz96_drift(&eq, 8.0).unwrap().iter().all(|v| *v == 0.0));
        assert!(lorenz96_drift(&[0.0; 5], 8.0)
            .unwrap()
            .iter()
            .all(|v| *v == 8.0));
        let d = lorenz96_drift(&[1.0, 0.0, 0.0, 0.0, 0.0], 8.0).unwrap();
        assert_eq!(d, vec![7.0, 8.0, 8.0, 8.0, 8.0]);
        assert!(matches!(
            lorenz96_drift(&[0.0; 3], 8.0),
            Err(Error::DimensionTooSmall(3))
        ));
    }

    #[test]
    fn rk4_fixed_point_and_scalar_factor() {
        let eq = vec![8.0; 40];
        assert_eq!(rk4_step(&eq, 0.05, 8.0), eq);

        for dt in [0.05, 0.1, 0.5] {
            let next = rk4_step_with(&[1.0], dt, |x, out| out[0] = -x[0]);
            let factor = 1.0 - dt + dt * dt / 2.0 - dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
            assert!((next[0] - factor).abs() < 1e-15, "dt={dt}");
        }
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        let mut rng = RngStream::new(3, 3);
        let x: Vec<f64> = (0..40).map(|_| 8.0 + rng.standard_normal()).collect();
        let gap = |dt: f64| {
            let one = rk4_step(&x, dt, 8.0);
            let half = rk4_step(&rk4_step(&x, dt / 2.0, 8.0), dt / 2.0, 8.0);
            one.iter()
                .zip(&half)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        // halving dt shrinks the local discrepancy by ~2^5
        let ratio = gap(0.05) / gap(0.025);
        assert!(ratio > 20.0 && ratio < 45.0, "ratio {ratio}");
    }

    #[test]
    fn lorenz_observation_mapping() {
        let m = Lorenz96Model::new(Lorenz96Params::standard(40)).unwrap();
        assert_eq!(m.obs_dim(), 20);
        // 1-based state index 2m-1 maps to observation m
        assert_eq!(m.observed_index_of(0), Some(0));
        assert_eq!(m.observed_index_of(4), Some(2));
        assert_eq!(m.observed_index_of(1), None);
        assert_eq!(m.log_likelihood_factor(1, &[0.0; 20], 3.0), 0.0);
        assert!(Lorenz96Model::new(Lorenz96Params::standard(7)).is_err());
    }

    #[test]
    fn lorenz_initial_variance() {
        let m = Lorenz96Model::new(Lorenz96Params::standard(4)).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let mut sum_sq = [0.0; 4];
        let mut x = [0.0; 4];
        for _ in 0..n {
            m.sample_initial(&mut rng, &mut x);
            for (s, v) in sum_sq.iter_mut().zip(&x) {
                *s += v * v;
            }
        }
        for s in sum_sq {
            let var = s / n as f64;
            assert!((var - 0.01).abs() < 0.0005, "{var}");
        }
    }
}
