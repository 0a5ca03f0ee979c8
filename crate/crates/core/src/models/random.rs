//! Baseline that samples ratings from the training label distribution.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::WindowTensor;
use crate::models::common::N_CLASSES;
use crate::observation::{Dimension, Ratings};
use crate::rng::{hash_str, rng_from, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    /// Label counts per dimension and class (class index = rating - 1).
    pub counts: Vec<[u64; N_CLASSES]>,
    pub seed: u64,
}

impl RandomBaseline {
    pub fn fit(labels: &[Ratings], seed: u64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("random baseline labels"));
        }
        let mut counts = vec![[0u64; N_CLASSES]; Dimension::ALL.len()];
        for r in labels {
            for d in Dimension::ALL {
                counts[d.index()][r.get(d) as usize - 1] += 1;
            }
        }
        Ok(RandomBaseline { counts, seed })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Ratings {
        let c: Vec<usize> = self
            .counts
            .iter()
            .map(|w| WeightedIndex::new(w.iter().copied()).expect("nonempty counts").sample(rng))
            .collect();
        Ratings::from_classes([c[0], c[1], c[2]]).expect("class in range")
    }

    /// One draw per window, keyed by sample id so that a prediction does not
    /// depend on which other windows are in the batch.
    pub fn predict(&self, windows: &[WindowTensor]) -> Vec<Ratings> {
        windows
            .iter()
            .map(|w| self.draw(&mut rng_from(self.seed, &[stream::RANDOM_BASELINE, hash_str(&w.sample_id)])))
            .collect()
    }
}

/// `n` independent draws from the empirical label distribution.
pub fn random_baseline(train: &[Ratings], n: usize, seed: u64) -> Result<Vec<Ratings>> {
    let model = RandomBaseline::fit(train, seed)?;
    let mut rng = rng_from(seed, &[stream::RANDOM_BASELINE]);
    Ok((0..n).map(|_| model.draw(&mut rng)).collect())
}
