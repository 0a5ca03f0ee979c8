//! Classification metrics over integer labels `1..=n_classes`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Binarizer;
use crate::observation::{Dimension, Ratings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
    Weighted,
}

fn check(preds: &[u8], targets: &[u8], n_classes: u8) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("metric input"));
    }
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch { what: "predictions vs targets", expected: targets.len(), actual: preds.len() });
    }
    if let Some(bad) = preds.iter().chain(targets).find(|&&l| l == 0 || l > n_classes) {
        return Err(Error::Config(format!("label {bad} outside 1..={n_classes}")));
    }
    Ok(())
}

/// F1 over labels `1..=n_classes`. For the macro average, classes that are
/// neither predicted nor present are skipped, and a zero-denominator
/// precision or recall counts as 0.
pub fn f1_score(preds: &[u8], targets: &[u8], n_classes: u8, average: F1Average) -> Result<f64> {
    check(preds, targets, n_classes)?;
    let k = n_classes as usize;
    let (mut tp, mut fp, mut fneg) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    for (&p, &t) in preds.iter().zip(targets) {
        let (p, t) = (p as usize - 1, t as usize - 1);
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    if average == F1Average::Micro {
        let tp: usize = tp.iter().sum();
        return Ok(tp as f64 / preds.len() as f64);
    }
    let per_class = |c: usize| {
        let prec = if tp[c] + fp[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fp[c]) as f64 };
        let rec = if tp[c] + fneg[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fneg[c]) as f64 };
        if prec + rec == 0.0 {
            0.0
        } else {
            2.0 * prec * rec / (prec + rec)
        }
    };
    match average {
        F1Average::Macro => {
            let active: Vec<usize> = (0..k).filter(|&c| tp[c] + fp[c] + fneg[c] > 0).collect();
            Ok(active.iter().map(|&c| per_class(c)).sum::<f64>() / active.len() as f64)
        }
        F1Average::Weighted => {
            let n = preds.len() as f64;
            Ok((0..k).map(|c| per_class(c) * (tp[c] + fneg[c]) as f64 / n).sum())
        }
        F1Average::Micro => unreachable!(),
    }
}

pub fn f1_macro(preds: &[u8], targets: &[u8], n_classes: u8) -> Result<f64> {
    f1_score(preds, targets, n_classes, F1Average::Macro)
}

pub fn accuracy(preds: &[u8], targets: &[u8]) -> Result<f64> {
    check(preds, targets, u8::MAX)?;
    Ok(preds.iter().zip(targets).filter(|(p, t)| p == t).count() as f64 / preds.len() as f64)
}

pub fn mae(preds: &[u8], targets: &[u8]) -> Result<f64> {
    check(preds, targets, u8::MAX)?;
    Ok(preds.iter().zip(targets).map(|(&p, &t)| (p as f64 - t as f64).abs()).sum::<f64>() / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionMetrics {
    pub dimension: Dimension,
    pub f1: f64,
    pub accuracy: f64,
    pub mae: f64,
}

/// Metrics per dimension plus their means. Binary reports score labels
/// 1 = low performance, 2 = medium-to-high performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub binary: bool,
    pub n: usize,
    pub f1_macro: f64,
    pub accuracy: f64,
    pub mae: f64,
    pub per_dimension: Vec<DimensionMetrics>,
}

impl MetricsReport {
    pub fn dimension(&self, d: Dimension) -> &DimensionMetrics {
        &self.per_dimension[d.index()]
    }

    fn from_dimensions(binary: bool, n: usize, per_dimension: Vec<DimensionMetrics>) -> Self {
        let k = per_dimension.len() as f64;
        MetricsReport {
            binary,
            n,
            f1_macro: per_dimension.iter().map(|d| d.f1).sum::<f64>() / k,
            accuracy: per_dimension.iter().map(|d| d.accuracy).sum::<f64>() / k,
            mae: per_dimension.iter().map(|d| d.mae).sum::<f64>() / k,
            per_dimension,
        }
    }
}

fn dimension_metrics(d: Dimension, p: &[u8], t: &[u8], n_classes: u8, average: F1Average) -> Result<DimensionMetrics> {
    Ok(DimensionMetrics { dimension: d, f1: f1_score(p, t, n_classes, average)?, accuracy: accuracy(p, t)?, mae: mae(p, t)? })
}

/// Five-class metrics for every dimension.
pub fn evaluate(preds: &[Ratings], targets: &[Ratings], average: F1Average) -> Result<MetricsReport> {
    let per = Dimension::ALL
        .iter()
        .map(|&d| {
            let p: Vec<u8> = preds.iter().map(|r| r.get(d)).collect();
            let t: Vec<u8> = targets.iter().map(|r| r.get(d)).collect();
            dimension_metrics(d, &p, &t, 5, average)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_dimensions(false, preds.len(), per))
}

/// Binarized labels (1 = low, 2 = medium/high) for one dimension.
pub fn binary_labels(ratings: &[Ratings], d: Dimension, binarizer: &Binarizer) -> Vec<u8> {
    ratings
        .iter()
        .map(|r| binarizer.binarize(r.get(d) as i64, d).expect("ratings are in range").class() as u8 + 1)
        .collect()
}

/// Binarize both sides, then score two-class metrics for one dimension.
pub fn evaluate_binary_dimension(preds: &[Ratings], targets: &[Ratings], d: Dimension, binarizer: &Binarizer) -> Result<DimensionMetrics> {
    dimension_metrics(d, &binary_labels(preds, d, binarizer), &binary_labels(targets, d, binarizer), 2, F1Average::Macro)
}

pub fn evaluate_binary(preds: &[Ratings], targets: &[Ratings], binarizer: &Binarizer) -> Result<MetricsReport> {
    let per = Dimension::ALL
        .iter()
        .map(|&d| evaluate_binary_dimension(preds, targets, d, binarizer))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_dimensions(true, preds.len(), per))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_predictions() {
        let t = [1, 2, 3, 4, 5, 5];
        assert_eq!(f1_macro(&t, &t, 5).unwrap(), 1.0);
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn two_class_hand_case() {
        assert_abs_diff_eq!(f1_macro(&[1, 2, 1, 2], &[1, 1, 2, 2], 2).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn constant_predictor_on_uniform_targets() {
        let t: Vec<u8> = (1..=5).cycle().take(100).collect();
        let p = vec![1u8; 100];
        assert_abs_diff_eq!(f1_macro(&p, &t, 5).unwrap(), (2.0 * 0.2 / 1.2) / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn extreme_mae() {
        assert_eq!(mae(&[1, 1, 1], &[5, 5, 5]).unwrap(), 4.0);
    }

    #[test]
    fn micro_equals_accuracy_and_weighted_uses_support() {
        let p = [1, 1, 2, 3, 3, 3];
        let t = [1, 2, 2, 3, 3, 1];
        assert_eq!(f1_score(&p, &t, 3, F1Average::Micro).unwrap(), accuracy(&p, &t).unwrap());
        // class 1: P 1/2 R 1/2; class 2: P 1 R 1/2; class 3: P 2/3 R 1.
        let f = [0.5, 2.0 / 3.0, 0.8];
        let w = (f[0] * 2.0 + f[1] * 2.0 + f[2] * 2.0) / 6.0;
        assert_abs_diff_eq!(f1_score(&p, &t, 3, F1Average::Weighted).unwrap(), w, epsilon = 1e-12);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(f1_macro(&[], &[], 5).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
        assert!(f1_macro(&[6], &[1], 5).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn perfect_multiclass_is_perfect_binary() {
        let r: Vec<Ratings> = (1..=5).map(|k| Ratings::new(k, 6 - k, k).unwrap()).collect();
        let rep = evaluate_binary(&r, &r, &Binarizer::default()).unwrap();
        assert_eq!(rep.f1_macro, 1.0);
        assert!(rep.binary);
    }
}
