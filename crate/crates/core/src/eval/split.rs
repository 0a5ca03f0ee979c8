//! Train/validation/test splits.

use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::WindowTensor;
use crate::observation::{Phase, Sample};
use crate::rng::{rng_from, stream};

/// What a split needs to know about a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleKey {
    pub sample_id: String,
    pub participant_id: String,
    pub phase: Phase,
}

impl From<&Sample> for SampleKey {
    fn from(s: &Sample) -> Self {
        SampleKey { sample_id: s.sample_id.clone(), participant_id: s.participant_id.clone(), phase: s.phase }
    }
}

impl From<&WindowTensor> for SampleKey {
    fn from(w: &WindowTensor) -> Self {
        SampleKey { sample_id: w.sample_id.clone(), participant_id: w.participant_id.clone(), phase: w.phase }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const DEFAULT: SplitCounts = SplitCounts { train: 2280, val: 569, test: 120 };

    /// Two test samples per participant; the rest divided between train and
    /// validation in the default 2280:569 ratio.
    pub fn scaled(n_samples: usize, n_participants: usize) -> Self {
        let test = 2 * n_participants;
        let rest = n_samples.saturating_sub(test);
        let d = Self::DEFAULT;
        let train = ((rest * d.train) as f64 / (d.train + d.val) as f64).round() as usize;
        SplitCounts { train, val: rest - train, test }
    }

    /// The default counts when they fit this dataset exactly, else [`scaled`](Self::scaled).
    pub fn for_dataset(n_samples: usize, n_participants: usize) -> Self {
        let d = Self::DEFAULT;
        if n_samples == d.train + d.val + d.test && d.test == 2 * n_participants {
            d
        } else {
            Self::scaled(n_samples, n_participants)
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    /// Partition `items` by the id sets, keeping input order within each part.
    pub fn apply<T: Clone>(&self, items: &[T], id: impl Fn(&T) -> &str) -> (Vec<T>, Vec<T>, Vec<T>) {
        let sets: [HashSet<&str>; 3] = [
            self.train.iter().map(String::as_str).collect(),
            self.val.iter().map(String::as_str).collect(),
            self.test.iter().map(String::as_str).collect(),
        ];
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for it in items {
            let k = id(it);
            if sets[0].contains(k) {
                out.0.push(it.clone());
            } else if sets[1].contains(k) {
                out.1.push(it.clone());
            } else if sets[2].contains(k) {
                out.2.push(it.clone());
            }
        }
        out
    }
}

/// Test set: one Before and one After sample per participant, drawn at
/// random. The remainder is shuffled and cut into train and validation;
/// when the dataset is larger than the requested counts the cut keeps the
/// train:val ratio.
pub fn make_split(keys: &[SampleKey], counts: SplitCounts, seed: u64) -> Result<SplitSpec> {
    if keys.len() < counts.total() {
        return Err(Error::Config(format!("split needs {} samples, dataset has {}", counts.total(), keys.len())));
    }
    let mut ids = HashSet::new();
    if let Some(k) = keys.iter().find(|k| !ids.insert(k.sample_id.as_str())) {
        return Err(Error::Config(format!("duplicate sample id {}", k.sample_id)));
    }
    let mut by_participant: BTreeMap<&str, [Vec<usize>; 2]> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        by_participant.entry(&k.participant_id).or_default()[k.phase as usize].push(i);
    }
    if counts.test != 2 * by_participant.len() {
        return Err(Error::Config(format!(
            "test count {} must be two per participant ({} participants)",
            counts.test,
            by_participant.len()
        )));
    }
    let mut rng = rng_from(seed, &[stream::SPLIT]);
    let mut in_test = vec![false; keys.len()];
    let mut test = Vec::with_capacity(counts.test);
    for (p, phases) in &by_participant {
        for (phase, idx) in [Phase::Before, Phase::After].iter().zip(phases) {
            let &i = idx
                .choose(&mut rng)
                .ok_or_else(|| Error::Config(format!("participant {p} has no {phase} sample for the test set")))?;
            in_test[i] = true;
            test.push(keys[i].sample_id.clone());
        }
    }
    let mut rest: Vec<usize> = (0..keys.len()).filter(|&i| !in_test[i]).collect();
    rest.shuffle(&mut rng);
    let n_train = if rest.len() == counts.train + counts.val {
        counts.train
    } else {
        ((rest.len() * counts.train) as f64 / (counts.train + counts.val).max(1) as f64).round() as usize
    };
    let train = rest[..n_train].iter().map(|&i| keys[i].sample_id.clone()).collect();
    let val = rest[n_train..].iter().map(|&i| keys[i].sample_id.clone()).collect();
    Ok(SplitSpec { train, val, test })
}

/// Shuffle `ids` and cut off the first `fraction` for training.
pub fn random_partition(ids: &[String], fraction: f64, seed: u64, path: &[u64]) -> (Vec<String>, Vec<String>) {
    let mut v = ids.to_vec();
    v.shuffle(&mut rng_from(seed, path));
    let cut = ((v.len() as f64) * fraction).round() as usize;
    let val = v.split_off(cut.min(v.len()));
    (v, val)
}
