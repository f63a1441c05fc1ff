//! Seeded random streams.
//!
//! Every random consumer in an experiment owns one [`RngStream`]. A stream is a
//! ChaCha8 generator keyed by the master seed, with the 64-bit ChaCha stream
//! selector set to `stream_id`. Stream ids for experiment roles are derived as
//! `mix(master_seed, run_index, fnv1a(role_tag))`, see [`RngStream::for_role`].

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::LowerTriangular;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream id for `(master_seed, run_index, role_tag)`.
pub fn derive_stream_id(master_seed: u64, run_index: u64, role_tag: &str) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ run_index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ fnv1a(role_tag))
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn for_role(master_seed: u64, run_index: u64, role_tag: &str) -> Self {
        Self::new(master_seed, derive_stream_id(master_seed, run_index, role_tag))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream for a sub-role, e.g. one k-means restart.
    pub fn fork(&mut self, tag: &str) -> RngStream {
        let salt = self.inner.next_u64();
        RngStream::new(self.seed, derive_stream_id(self.stream_id, salt, tag))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut self.inner);
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `mean + L·z` with `z` standard normal.
pub fn sample_mvn(
    mean: &DVector<f64>,
    chol_cov: &LowerTriangular,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let n = mean.len();
    if chol_cov.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: chol_cov.dim(),
            context: "covariance factor vs mean",
        });
    }
    let mut z = vec![0.0; n];
    rng.fill_standard_normal(&mut z);
    let mut out = vec![0.0; n];
    chol_cov.mul_into(&z, &mut out);
    Ok(DVector::from_iterator(
        n,
        out.iter().zip(mean.iter()).map(|(a, b)| a + b),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_repeat() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::new(7, 4);
        let mut d = RngStream::new(7, 3);
        let same = (0..16).filter(|_| c.next_u64() == d.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn role_streams_differ() {
        let ids = [
            derive_stream_id(1, 0, "data"),
            derive_stream_id(1, 1, "data"),
            derive_stream_id(1, 0, "bootstrap"),
            derive_stream_id(2, 0, "data"),
        ];
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                assert_ne!(ids[i], ids[j]);
            }
        }
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let mean = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let mut rng = RngStream::new(1, 1);
        let x = sample_mvn(&mean, &LowerTriangular::zeros(3), &mut rng).unwrap();
        assert_eq!(x, mean);
    }

    #[test]
    fn sample_mean_concentrates() {
        let n = 100_000;
        let d = 3;
        let mean = DVector::zeros(d);
        let chol = LowerTriangular::identity(d);
        let mut rng = RngStream::new(11, 0);
        let mut acc = DVector::<f64>::zeros(d);
        for _ in 0..n {
            acc += sample_mvn(&mean, &chol, &mut rng).unwrap();
        }
        acc /= n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!(acc.iter().all(|m| m.abs() < bound), "{acc:?}");
    }

    #[test]
    fn sample_mvn_is_deterministic() {
        let mean = DVector::from_vec(vec![0.0, 1.0]);
        let chol = LowerTriangular::identity(2);
        let a = sample_mvn(&mean, &chol, &mut RngStream::new(5, 9)).unwrap();
        let b = sample_mvn(&mean, &chol, &mut RngStream::new(5, 9)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn dimension_mismatch() {
        let mean = DVector::zeros(2);
        let chol = LowerTriangular::identity(3);
        assert!(matches!(
            sample_mvn(&mean, &chol, &mut RngStream::new(0, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
