//! State-space partitions: ordered lists of disjoint index blocks covering
//! `0..d_x`.
//!
//! Indices are 0-based in memory. The text form used by the CLI is 1-based,
//! one block per line, comma-separated.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    d_x: usize,
}

impl Partition {
    /// Validates that `blocks` is a disjoint cover of `0..d_x` with no empty
    /// block. Indices inside a block are sorted; block order is kept.
    pub fn new(mut blocks: Vec<Vec<usize>>, d_x: usize) -> Result<Self> {
        let mut seen = vec![false; d_x];
        for (k, block) in blocks.iter_mut().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {k} is empty")));
            }
            block.sort_unstable();
            for &i in block.iter() {
                if i >= d_x {
                    return Err(Error::InvalidPartition(format!(
                        "index {} out of range 1..={d_x}",
                        i + 1
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!(
                        "index {} appears twice",
                        i + 1
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "index {} is not covered",
                missing + 1
            )));
        }
        Ok(Self { blocks, d_x })
    }

    pub fn single_block(d_x: usize) -> Self {
        Self {
            blocks: vec![(0..d_x).collect()],
            d_x,
        }
    }

    /// Builds a partition from per-index block labels in `0..k`.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut blocks = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidPartition(format!("label {l} >= K={k}")));
            }
            blocks[l].push(i);
        }
        Self::new(blocks, labels.len())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.d_x
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Block index of every state variable.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.d_x];
        for (k, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i] = k;
            }
        }
        labels
    }

    /// Same blocks, ordered by their smallest index. Two partitions describe
    /// the same set partition iff their canonical forms are equal.
    pub fn canonical(&self) -> Partition {
        let mut blocks = self.blocks.clone();
        blocks.sort_by_key(|b| b[0]);
        Partition {
            blocks,
            d_x: self.d_x,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            let line: Vec<String> = block.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Parses the one-block-per-line text form. `d_x` is inferred as the
    /// largest index.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut max_index = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut block = Vec::new();
            for field in line.split(',') {
                let field = field.trim();
                let idx: usize = field.parse().map_err(|_| Error::ParseError {
                    line: lineno + 1,
                    column: 0,
                    message: format!("not a positive integer: {field:?}"),
                })?;
                if idx == 0 {
                    return Err(Error::ParseError {
                        line: lineno + 1,
                        column: 0,
                        message: "indices are 1-based".into(),
                    });
                }
                max_index = max_index.max(idx);
                block.push(idx - 1);
            }
            blocks.push(block);
        }
        if blocks.is_empty() {
            return Err(Error::EmptyInput);
        }
        Self::new(blocks, max_index)
    }
}

/// Fixed partitioning schemes used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Consecutive indices per block.
    ContiguousKnown,
    /// Uniform random permutation cut into K near-equal parts.
    Random,
    /// Equally spaced indices per block: `{k, k+K, k+2K, ...}`.
    StridedBad,
}

/// Splits `0..len` into `k` consecutive chunks whose sizes differ by at most one.
fn near_equal_sizes(len: usize, k: usize) -> Vec<usize> {
    (0..k)
        .map(|b| len / k + usize::from(b < len % k))
        .collect()
}

/// Consecutive blocks with the given sizes.
pub fn contiguous_with_sizes(sizes: &[usize]) -> Result<Partition> {
    let d_x = sizes.iter().sum();
    let mut start = 0;
    let blocks = sizes
        .iter()
        .map(|&s| {
            let b: Vec<usize> = (start..start + s).collect();
            start += s;
            b
        })
        .collect();
    Partition::new(blocks, d_x)
}

/// Near-equal consecutive blocks; used when no better partition is available.
pub fn contiguous_near_equal(d_x: usize, k: usize) -> Result<Partition> {
    if k == 0 || k > d_x {
        return Err(Error::InvalidK {
            k,
            d_x,
            reason: "need 1 <= K <= d_x",
        });
    }
    contiguous_with_sizes(&near_equal_sizes(d_x, k))
}

pub fn make_partition(
    scheme: PartitionScheme,
    d_x: usize,
    k: usize,
    rng: Option<&mut RngStream>,
) -> Result<Partition> {
    if k == 0 || k > d_x {
        return Err(Error::InvalidK {
            k,
            d_x,
            reason: "need 1 <= K <= d_x",
        });
    }
    match scheme {
        PartitionScheme::ContiguousKnown => {
            if d_x % k != 0 {
                return Err(Error::InvalidK {
                    k,
                    d_x,
                    reason: "K must divide d_x for the contiguous scheme",
                });
            }
            contiguous_near_equal(d_x, k)
        }
        PartitionScheme::StridedBad => {
            if d_x % k != 0 {
                return Err(Error::InvalidK {
                    k,
                    d_x,
                    reason: "K must divide d_x for the strided scheme",
                });
            }
            let blocks = (0..k).map(|b| (b..d_x).step_by(k).collect()).collect();
            Partition::new(blocks, d_x)
        }
        PartitionScheme::Random => {
            let rng = rng.ok_or(Error::InvalidK {
                k,
                d_x,
                reason: "random scheme needs a random stream",
            })?;
            let mut perm: Vec<usize> = (0..d_x).collect();
            rng.shuffle(&mut perm);
            let mut start = 0;
            let blocks = near_equal_sizes(d_x, k)
                .into_iter()
                .map(|s| {
                    let b = perm[start..start + s].to_vec();
                    start += s;
                    b
                })
                .collect();
            Partition::new(blocks, d_x)
        }
    }
}
