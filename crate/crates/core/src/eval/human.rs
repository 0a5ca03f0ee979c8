//! Scoring pooled human annotations against the users' own ratings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::annotate::AnnotationRecord;
use crate::error::{Error, Result};
use crate::eval::metrics::{evaluate, evaluate_binary, F1Average, MetricsReport};
use crate::features::FeatureSet;
use crate::labels::Binarizer;
use crate::observation::{Dimension, Ratings};

/// Per-dimension exact matches are what a bonus is paid on.
pub const BONUS_PER_CORRECT_USD: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionBaseline {
    pub condition: FeatureSet,
    pub n: usize,
    pub multiclass: Option<MetricsReport>,
    pub binary: Option<MetricsReport>,
    pub correct_predictions: usize,
    pub bonus_usd: f64,
}

/// Pool every record per condition and score it against ground truth.
/// Conditions come out in a fixed order; a condition with no records has
/// `n = 0` and no metrics.
pub fn aggregate_human_baseline(
    records: &[AnnotationRecord],
    truth: &HashMap<String, Ratings>,
    binarizer: &Binarizer,
) -> Result<Vec<ConditionBaseline>> {
    if let Some(r) = records.iter().find(|r| !truth.contains_key(&r.sample_id)) {
        return Err(Error::UnknownSample(r.sample_id.clone()));
    }
    FeatureSet::ALL
        .iter()
        .map(|&c| {
            let (preds, targets): (Vec<Ratings>, Vec<Ratings>) =
                records.iter().filter(|r| r.condition == c).map(|r| (r.predictions, truth[&r.sample_id])).unzip();
            let correct = preds
                .iter()
                .zip(&targets)
                .map(|(p, t)| Dimension::ALL.iter().filter(|&&d| p.get(d) == t.get(d)).count())
                .sum::<usize>();
            let (multiclass, binary) = if preds.is_empty() {
                (None, None)
            } else {
                (Some(evaluate(&preds, &targets, F1Average::Macro)?), Some(evaluate_binary(&preds, &targets, binarizer)?))
            };
            Ok(ConditionBaseline {
                condition: c,
                n: preds.len(),
                multiclass,
                binary,
                correct_predictions: correct,
                bonus_usd: correct as f64 * BONUS_PER_CORRECT_USD,
            })
        })
        .collect()
}
