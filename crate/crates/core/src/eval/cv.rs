//! Leave-one-participant-out cross-validation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{evaluate, evaluate_binary, F1Average, MetricsReport};
use crate::eval::split::random_partition;
use crate::features::{FeatureSet, WindowTensor};
use crate::labels::Binarizer;
use crate::models::{fit_model, FitOptions, ModelKind};
use crate::observation::Ratings;
use crate::rng::{derive_seed, stream};

pub const CV_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub participant_id: String,
    pub n_train: usize,
    pub n_val: usize,
    pub multiclass: MetricsReport,
    pub binary: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub multiclass_f1: MeanStd,
    pub binary_f1: MeanStd,
    pub multiclass_accuracy: MeanStd,
    pub binary_accuracy: MeanStd,
    pub multiclass_mae: MeanStd,
}

pub fn summarize(folds: &[FoldResult]) -> CvSummary {
    let pick = |f: fn(&FoldResult) -> f64| mean_std(&folds.iter().map(f).collect::<Vec<_>>());
    CvSummary {
        multiclass_f1: pick(|f| f.multiclass.f1_macro),
        binary_f1: pick(|f| f.binary.f1_macro),
        multiclass_accuracy: pick(|f| f.multiclass.accuracy),
        binary_accuracy: pick(|f| f.binary.accuracy),
        multiclass_mae: pick(|f| f.multiclass.mae),
    }
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub kind: ModelKind,
    pub set: FeatureSet,
    pub options: FitOptions,
    pub average: F1Average,
    pub binarizer: Binarizer,
    pub seed: u64,
    /// Folds run concurrently on at most this many threads.
    pub jobs: usize,
}

/// Hold out one participant per fold and split the rest 80/20 into train
/// and validation. Folds are ordered by participant id.
pub fn loocv(windows: &[WindowTensor], config: &CvConfig) -> Result<Vec<FoldResult>> {
    let participants: Vec<String> =
        windows.iter().map(|w| w.participant_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if participants.len() < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 participants, found {}", participants.len())));
    }
    let run = |fi: usize, pid: &String| -> Result<FoldResult> {
        let (test, rest): (Vec<&WindowTensor>, Vec<&WindowTensor>) = windows.iter().partition(|w| &w.participant_id == pid);
        let ids: Vec<String> = rest.iter().map(|w| w.sample_id.clone()).collect();
        let (train_ids, _) = random_partition(&ids, CV_TRAIN_FRACTION, config.seed, &[stream::FOLD, fi as u64]);
        let train_set: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
        let (train, val): (Vec<WindowTensor>, Vec<WindowTensor>) =
            rest.into_iter().cloned().partition(|w| train_set.contains(w.sample_id.as_str()));
        let test: Vec<WindowTensor> = test.into_iter().cloned().collect();
        let seed = derive_seed(config.seed, &[stream::FOLD, fi as u64]);
        let (model, _) = fit_model(config.kind, config.set, &train, &val, &config.options, seed)?;
        let preds = model.predict(&test)?;
        let targets: Vec<Ratings> = test.iter().map(|w| w.labels).collect();
        Ok(FoldResult {
            participant_id: pid.clone(),
            n_train: train.len(),
            n_val: val.len(),
            multiclass: evaluate(&preds, &targets, config.average)?,
            binary: evaluate_binary(&preds, &targets, &config.binarizer)?,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| participants.par_iter().enumerate().map(|(i, p)| run(i, p)).collect())
}
