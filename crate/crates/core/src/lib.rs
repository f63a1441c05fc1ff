//! Block particle filtering with adaptive state-space partitioning.
//!
//! The filter estimates the correlation of the predicted particle cloud,
//! clusters the state variables into size-bounded blocks with constrained
//! spectral clustering and then weights and resamples each block on its own.

pub mod error;
pub mod filters;
pub mod harness;
pub mod linalg;
pub mod mcf;
pub mod metrics;
pub mod models;
pub mod partition;
pub mod partitioning;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use partition::{make_partition, Partition, PartitionScheme};
pub use rng::RngStream;

pub use nalgebra;
