//! Descriptive statistics: phase-stratified error and rating correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{Dimension, Phase, Ratings};

/// Mean absolute error (averaged over the three dimensions) per phase; a
/// phase with no samples is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrors {
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub n_before: usize,
    pub n_after: usize,
}

pub fn stratified_error(preds: &[Ratings], targets: &[Ratings], phases: &[Phase]) -> Result<PhaseErrors> {
    if preds.len() != targets.len() || preds.len() != phases.len() {
        return Err(Error::LengthMismatch { what: "stratified inputs", expected: targets.len(), actual: preds.len() });
    }
    let mut sum = [0.0; 2];
    let mut n = [0usize; 2];
    for ((p, t), ph) in preds.iter().zip(targets).zip(phases) {
        let e: f64 = Dimension::ALL.iter().map(|&d| (p.get(d) as f64 - t.get(d) as f64).abs()).sum::<f64>() / 3.0;
        sum[*ph as usize] += e;
        n[*ph as usize] += 1;
    }
    let mean = |k: usize| (n[k] > 0).then(|| sum[k] / n[k] as f64);
    Ok(PhaseErrors { before: mean(0), after: mean(1), n_before: n[0], n_after: n[1] })
}

/// Sample Pearson correlation.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { what: "correlation inputs", expected: a.len(), actual: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::DegenerateInput("correlation needs at least two points".into()));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput("correlation input has zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise correlations between the three rating dimensions, in the order
/// (competence, surprise), (competence, intention), (surprise, intention).
pub fn dimension_correlations(ratings: &[Ratings]) -> Result<[f64; 3]> {
    let col = |d: Dimension| ratings.iter().map(|r| r.get(d) as f64).collect::<Vec<_>>();
    let (c, s, i) = (col(Dimension::Competence), col(Dimension::Surprise), col(Dimension::Intention));
    Ok([pearson_r(&c, &s)?, pearson_r(&c, &i)?, pearson_r(&s, &i)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn r(c: i64, s: i64, i: i64) -> Ratings {
        Ratings::new(c, s, i).unwrap()
    }

    #[test]
    fn hand_built_strata() {
        let preds = [r(1, 1, 1), r(2, 2, 2), r(5, 5, 5), r(3, 3, 3)];
        let targets = [r(1, 1, 4), r(2, 2, 2), r(1, 5, 5), r(3, 4, 5)];
        let phases = [Phase::Before, Phase::Before, Phase::After, Phase::After];
        let e = stratified_error(&preds, &targets, &phases).unwrap();
        assert_abs_diff_eq!(e.before.unwrap(), (1.0 + 0.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.after.unwrap(), (4.0 / 3.0 + 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn absent_stratum() {
        let p = [r(1, 1, 1)];
        let e = stratified_error(&p, &p, &[Phase::Before]).unwrap();
        assert_eq!(e.after, None);
        assert_eq!(e.before, Some(0.0));
    }

    #[test]
    fn self_and_anti_correlation() {
        let x = [1.0, 2.0, 4.0, 3.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson_r(&x, &x).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson_r(&x, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(pearson_r(&x, &[1.0; 4]), Err(Error::DegenerateInput(_))));
    }
}
