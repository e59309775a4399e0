use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::AugmentationSet;
use crate::rng::RngState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// Size drawn uniformly from `0..=max`, as in the learning phase.
    RandomSize { max: usize },
    /// Exactly `k` transforms, as in the usage phase.
    FixedSize { k: usize },
}

/// Distinct indices into an [`AugmentationSet`], in application order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubsetSample {
    pub indices: Vec<usize>,
}

impl SubsetSample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn sample_subset(set: &AugmentationSet, mode: SubsetMode, rng: &mut RngState) -> Result<SubsetSample> {
    let n = set.len();
    let size = match mode {
        SubsetMode::RandomSize { max } => {
            check(max, n)?;
            rng.random_range(0..=max)
        }
        SubsetMode::FixedSize { k } => {
            check(k, n)?;
            k
        }
    };
    if size == 0 {
        return Ok(SubsetSample::default());
    }
    // Fully shuffled order, so the sampled order doubles as application order.
    let indices = rand::seq::index::sample(rng, n, size).into_vec();
    Ok(SubsetSample { indices })
}

fn check(requested: usize, available: usize) -> Result<()> {
    if requested > available {
        Err(Error::SubsetTooLarge { requested, available })
    } else {
        Ok(())
    }
}
