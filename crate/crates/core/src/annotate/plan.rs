use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorQueue {
    pub condition: FeatureSet,
    pub samples: Vec<String>,
}

/// Who annotates what. Each annotator works within a single condition and
/// never sees a sample twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub sample_ids: Vec<String>,
    pub conditions: Vec<FeatureSet>,
    pub annotators_per_sample: usize,
    pub queues: BTreeMap<String, AnnotatorQueue>,
}

pub const DEFAULT_ANNOTATORS_PER_SAMPLE: usize = 10;

impl AssignmentPlan {
    /// Cyclic blocks: annotator `a` of a condition takes samples
    /// `a*k .. a*k + k` modulo the sample count, so every sample is covered
    /// exactly `per_sample` times and queues never repeat a sample.
    pub fn build(sample_ids: &[String], conditions: &[FeatureSet], per_sample: usize, per_annotator: usize) -> Result<Self> {
        let n = sample_ids.len();
        if n == 0 || conditions.is_empty() || per_sample == 0 || per_annotator == 0 {
            return Err(Error::Config("plan needs samples, conditions and positive counts".into()));
        }
        let k = per_annotator.min(n);
        let slots = n * per_sample;
        let annotators = slots.div_ceil(k);
        let mut queues = BTreeMap::new();
        for &c in conditions {
            for a in 0..annotators {
                let len = k.min(slots - a * k);
                let samples = (0..len).map(|j| sample_ids[(a * k + j) % n].clone()).collect();
                queues.insert(format!("{}-{a:03}", c.short_name()), AnnotatorQueue { condition: c, samples });
            }
        }
        let plan = AssignmentPlan { sample_ids: sample_ids.to_vec(), conditions: conditions.to_vec(), annotators_per_sample: per_sample, queues };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let known: HashSet<&str> = self.sample_ids.iter().map(String::as_str).collect();
        for (a, q) in &self.queues {
            if !self.conditions.contains(&q.condition) {
                return Err(Error::Config(format!("annotator {a} uses condition {} outside the plan", q.condition)));
            }
            let mut seen = HashSet::new();
            for s in &q.samples {
                if !known.contains(s.as_str()) {
                    return Err(Error::UnknownSample(s.clone()));
                }
                if !seen.insert(s) {
                    return Err(Error::Config(format!("annotator {a} is assigned {s} twice")));
                }
            }
        }
        Ok(())
    }

    /// Target number of annotations for each (sample, condition).
    pub fn target(&self) -> usize {
        self.annotators_per_sample
    }

    pub fn total_assignments(&self) -> usize {
        self.queues.values().map(|q| q.samples.len()).sum()
    }
}
