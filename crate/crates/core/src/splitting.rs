//! Random half-sample partitions for multi sample splitting.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

/// One partition of the observations into a screening half and a testing half.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSplit {
    /// Rows used for screening, sorted. `⌊n/2⌋` of them.
    pub n_in: Vec<usize>,
    /// Rows used for testing, sorted. `⌈n/2⌉` of them.
    pub n_out: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n: usize,
    pub seed: u64,
    pub splits: Vec<SampleSplit>,
}

impl SplitPlan {
    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }
}

/// Draws `count` independent splits of `0..n`.
///
/// Split `b` comes from its own substream of `seed`, so growing `count`
/// leaves earlier splits unchanged.
pub fn make_splits(n: usize, count: usize, seed: u64) -> Result<SplitPlan> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("sample splitting needs n >= 4, got {n}")));
    }
    if count == 0 {
        return Err(Error::InvalidInput("number of splits must be positive".into()));
    }
    let splits = (0..count).map(|b| split_once(n, seed, b as u64)).collect();
    Ok(SplitPlan { n, seed, splits })
}

fn split_once(n: usize, seed: u64, b: u64) -> SampleSplit {
    let mut rng = substream(seed, Domain::Split, b);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let (first, second) = rows.split_at(n / 2);
    let mut n_in = first.to_vec();
    let mut n_out = second.to_vec();
    n_in.sort_unstable();
    n_out.sort_unstable();
    SampleSplit { n_in, n_out }
}
