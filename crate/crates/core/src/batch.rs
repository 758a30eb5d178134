use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Distinct instance ids in `[0, n)`, stored in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchIndices(Vec<usize>);

impl BatchIndices {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() > n {
            return Err(Error::InvalidBatch {
                batch: indices.len(),
                n,
            });
        }
        indices.sort_unstable();
        for pair in indices.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateIndex(pair[0]));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::IndexOutOfRange { index: last, n });
            }
        }
        Ok(BatchIndices(indices))
    }

    /// Every instance, i.e. the full batch.
    pub fn full(n: usize) -> Self {
        BatchIndices((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }
}

/// Draws a uniformly random `b`-subset of `[0, n)` without replacement.
pub fn sample_batch(rng: &mut Rng, n: usize, b: usize) -> Result<BatchIndices> {
    if b == 0 || b > n {
        return Err(Error::InvalidBatch { batch: b, n });
    }
    if b == n {
        return Ok(BatchIndices::full(n));
    }
    let mut indices = rand::seq::index::sample(rng, n, b).into_vec();
    indices.sort_unstable();
    Ok(BatchIndices(indices))
}
