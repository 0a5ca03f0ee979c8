//! Collapsing five-point ratings into low versus medium-to-high performance.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::observation::{check_rating, Dimension, Ratings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    LowPerf,
    MedHighPerf,
}

impl BinaryLabel {
    pub fn class(self) -> usize {
        self as usize
    }
}

/// Which end of the scale counts as low performance for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowRule {
    /// Ratings `<= n` are low performance.
    AtMost(u8),
    /// Ratings `>= n` are low performance (high surprise is undesirable).
    AtLeast(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binarizer {
    pub competence: LowRule,
    pub surprise: LowRule,
    pub intention: LowRule,
}

impl Default for Binarizer {
    fn default() -> Self {
        Binarizer { competence: LowRule::AtMost(2), surprise: LowRule::AtLeast(4), intention: LowRule::AtMost(2) }
    }
}

impl Binarizer {
    pub fn rule(&self, dimension: Dimension) -> LowRule {
        match dimension {
            Dimension::Competence => self.competence,
            Dimension::Surprise => self.surprise,
            Dimension::Intention => self.intention,
        }
    }

    pub fn binarize(&self, rating: i64, dimension: Dimension) -> Result<BinaryLabel> {
        let r = check_rating(dimension, rating)?;
        let low = match self.rule(dimension) {
            LowRule::AtMost(n) => r <= n,
            LowRule::AtLeast(n) => r >= n,
        };
        Ok(if low { BinaryLabel::LowPerf } else { BinaryLabel::MedHighPerf })
    }

    pub fn binarize_ratings(&self, ratings: &Ratings) -> [BinaryLabel; 3] {
        Dimension::ALL.map(|d| self.binarize(ratings.get(d) as i64, d).expect("ratings are range-checked"))
    }
}

/// Binarize with the default rules: competence and intention 1-2 are low,
/// surprise 4-5 is low.
pub fn binarize(rating: i64, dimension: Dimension) -> Result<BinaryLabel> {
    Binarizer::default().binarize(rating, dimension)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryLabel::*;

    #[test]
    fn examples() {
        assert_eq!(binarize(2, Dimension::Competence).unwrap(), LowPerf);
        assert_eq!(binarize(3, Dimension::Competence).unwrap(), MedHighPerf);
        assert_eq!(binarize(5, Dimension::Surprise).unwrap(), LowPerf);
        assert_eq!(binarize(3, Dimension::Surprise).unwrap(), MedHighPerf);
        assert!(binarize(0, Dimension::Intention).is_err());
        assert!(binarize(6, Dimension::Surprise).is_err());
    }

    #[test]
    fn total_and_monotone() {
        for d in Dimension::ALL {
            let labels: Vec<usize> = (1..=5).map(|r| binarize(r, d).unwrap().class()).collect();
            let increasing = labels.windows(2).all(|w| w[0] <= w[1]);
            let decreasing = labels.windows(2).all(|w| w[0] >= w[1]);
            match d {
                Dimension::Surprise => assert!(decreasing, "{labels:?}"),
                _ => assert!(increasing, "{labels:?}"),
            }
        }
    }
}
