//! Ground-truth impression oracle: how a simulated participant rates the
//! robot given the behaviors they just experienced.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{Dimension, Ratings};
use crate::sim::behavior::BehaviorKind;

/// Fraction of the recent window spent in each behavior, indexed by
/// [`BehaviorKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMix([f64; 3]);

impl BehaviorMix {
    pub fn new(weights: [f64; 3]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateInput(format!("behavior weights {weights:?} must be non-negative and sum to 1")));
        }
        Ok(BehaviorMix(weights))
    }

    pub fn pure(kind: BehaviorKind) -> Self {
        let mut w = [0.0; 3];
        w[kind.index()] = 1.0;
        BehaviorMix(w)
    }

    /// Time-weighted mix over a run of per-tick behaviors.
    pub fn from_ticks(ticks: &[BehaviorKind]) -> Result<Self> {
        if ticks.is_empty() {
            return Err(Error::EmptyInput("behavior history"));
        }
        let mut w = [0.0; 3];
        for b in ticks {
            w[b.index()] += 1.0;
        }
        let n = ticks.len() as f64;
        Ok(BehaviorMix(w.map(|c| c / n)))
    }

    pub fn weights(&self) -> [f64; 3] {
        self.0
    }
}

/// Fixed per participant for a whole session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpressionTraits {
    /// Additive rating bias per dimension.
    pub bias: [f64; 3],
    pub noise_scale: f64,
    /// Scales the amplitude of facial responses, in `[0, 1]`.
    pub expressiveness: f64,
}

impl ImpressionTraits {
    pub fn neutral() -> Self {
        ImpressionTraits { bias: [0.0; 3], noise_scale: 0.0, expressiveness: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitDistribution {
    pub bias_sd: f64,
    pub noise_min: f64,
    pub noise_max: f64,
    pub expressiveness_min: f64,
    pub expressiveness_max: f64,
}

impl Default for TraitDistribution {
    fn default() -> Self {
        TraitDistribution { bias_sd: 0.3, noise_min: 0.3, noise_max: 0.6, expressiveness_min: 0.0, expressiveness_max: 1.0 }
    }
}

impl TraitDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ImpressionTraits {
        let normal = Normal::new(0.0, self.bias_sd.max(0.0)).expect("finite sd");
        let bias = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
        let noise_scale = self.noise_min + (self.noise_max - self.noise_min) * rng.random::<f64>();
        let expressiveness =
            self.expressiveness_min + (self.expressiveness_max - self.expressiveness_min) * rng.random::<f64>();
        ImpressionTraits { bias, noise_scale, expressiveness: expressiveness.clamp(0.0, 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpressionModel {
    /// Mean latent rating per `[dimension][behavior]`.
    pub mu: [[f64; 3]; 3],
    /// Upper bounds of bins 1..=4; latent values above the last go to 5.
    pub cut_points: [f64; 4],
}

impl Default for ImpressionModel {
    fn default() -> Self {
        ImpressionModel {
            mu: [
                // NavStack, Spinning, WrongWay
                [4.3, 2.0, 1.7],
                [1.8, 3.9, 4.1],
                [4.3, 2.0, 1.7],
            ],
            cut_points: [1.5, 2.5, 3.5, 4.5],
        }
    }
}

impl ImpressionModel {
    pub fn expected_latent(&self, mix: &BehaviorMix, dimension: Dimension) -> f64 {
        let row = &self.mu[dimension.index()];
        mix.weights().iter().zip(row).map(|(w, m)| w * m).sum()
    }

    /// Bins are `(-inf, 1.5], (1.5, 2.5], ..., (4.5, inf)`.
    pub fn discretize(&self, latent: f64) -> u8 {
        1 + self.cut_points.iter().filter(|&&c| latent > c).count() as u8
    }

    /// Dissatisfaction in `[0, 1]`: 0 at the best competence mean, 1 at the worst.
    pub fn dissatisfaction(&self, mix: &BehaviorMix) -> f64 {
        let row = &self.mu[Dimension::Competence.index()];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let worst = row.iter().copied().fold(f64::INFINITY, f64::min);
        if best <= worst {
            return 0.0;
        }
        ((best - self.expected_latent(mix, Dimension::Competence)) / (best - worst)).clamp(0.0, 1.0)
    }

    pub fn sample_impression<R: Rng + ?Sized>(&self, mix: &BehaviorMix, traits: &ImpressionTraits, rng: &mut R) -> Ratings {
        let noise = Normal::new(0.0, traits.noise_scale.max(0.0)).expect("finite noise scale");
        let r = Dimension::ALL.map(|d| {
            let latent = self.expected_latent(mix, d) + traits.bias[d.index()] + noise.sample(rng);
            self.discretize(latent) as i64
        });
        Ratings::new(r[0], r[1], r[2]).expect("discretized ratings are in range")
    }
}

/// [`ImpressionModel::sample_impression`] with the default mean table.
pub fn sample_impression<R: Rng + ?Sized>(mix: &BehaviorMix, traits: &ImpressionTraits, rng: &mut R) -> Ratings {
    ImpressionModel::default().sample_impression(mix, traits, rng)
}
