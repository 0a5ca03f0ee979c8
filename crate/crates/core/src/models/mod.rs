//! Predictors: random baseline, random forest and three neural networks.

pub mod common;
pub mod conv;
pub mod forest;
pub mod gnn;
pub mod mlp;
pub mod network;
pub mod random;
pub mod train;
pub mod transformer;

#[cfg(test)]
pub(crate) mod testutil;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, WindowTensor};
use crate::observation::Ratings;

pub use common::{argmax, classes_from_logits, default_grid, hyper_grid, Hyperparams, N_CLASSES, N_HEADS};
pub use forest::{train_random_forest, ForestConfig, ForestModel, RandomForest};
pub use network::{Network, NetworkArch, NetworkModel};
pub use random::{random_baseline, RandomBaseline};
pub use train::{train_network, GridRun, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Random,
    RandomForest,
    Network(NetworkArch),
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Random,
        ModelKind::RandomForest,
        ModelKind::Network(NetworkArch::Mlp),
        ModelKind::Network(NetworkArch::Gnn),
        ModelKind::Network(NetworkArch::Transformer),
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Random => "random",
            ModelKind::RandomForest => "rf",
            ModelKind::Network(a) => a.name(),
        }
    }

    pub fn supports(self, set: FeatureSet) -> bool {
        match self {
            ModelKind::Network(a) => a.supports(set),
            _ => true,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(ModelKind::Random),
            "rf" | "forest" => Ok(ModelKind::RandomForest),
            other => other
                .parse::<NetworkArch>()
                .map(ModelKind::Network)
                .map_err(|_| Error::Config(format!("unknown model '{other}' (random, rf, mlp, gnn, transformer)"))),
        }
    }
}

/// A fitted model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Random(RandomBaseline),
    Forest(ForestModel),
    Network(NetworkModel),
}

impl Predictor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Predictor::Random(_) => ModelKind::Random,
            Predictor::Forest(_) => ModelKind::RandomForest,
            Predictor::Network(m) => ModelKind::Network(m.arch()),
        }
    }

    /// Feature set the model reads; the random baseline reads none.
    pub fn feature_set(&self) -> Option<FeatureSet> {
        match self {
            Predictor::Random(_) => None,
            Predictor::Forest(m) => Some(m.set),
            Predictor::Network(m) => Some(m.set),
        }
    }

    pub fn predict(&self, windows: &[WindowTensor]) -> Result<Vec<Ratings>> {
        match self {
            Predictor::Random(m) => Ok(m.predict(windows)),
            Predictor::Forest(m) => m.predict(windows),
            Predictor::Network(m) => m.predict(windows),
        }
    }
}

/// Settings for [`fit_model`] that only some model kinds read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub forest: ForestConfig,
    /// Empty means the architecture's default grid.
    pub grid: Vec<Hyperparams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { forest: ForestConfig::default(), grid: Vec::new() }
    }
}

/// Default grid anchored at the architecture's default sizes.
pub fn default_grid_for(arch: NetworkArch) -> Vec<Hyperparams> {
    hyper_grid(arch.default_hyperparams(), &[1e-3, 3e-4], &[32, 64], &[0.1, 0.3])
}

/// Fit any model kind. Networks use `val` for early stopping and grid
/// selection; the other kinds ignore it.
pub fn fit_model(
    kind: ModelKind,
    set: FeatureSet,
    train: &[WindowTensor],
    val: &[WindowTensor],
    options: &FitOptions,
    seed: u64,
) -> Result<(Predictor, Option<TrainReport>)> {
    if !kind.supports(set) {
        return Err(Error::InvalidFeatureSet(format!("{kind} cannot use {set}")));
    }
    match kind {
        ModelKind::Random => {
            let labels: Vec<Ratings> = train.iter().map(|w| w.labels).collect();
            Ok((Predictor::Random(RandomBaseline::fit(&labels, seed)?), None))
        }
        ModelKind::RandomForest => Ok((Predictor::Forest(train_random_forest(train, set, &options.forest, seed)?), None)),
        ModelKind::Network(arch) => {
            let grid = if options.grid.is_empty() { default_grid_for(arch) } else { options.grid.clone() };
            let (m, report) = train_network(arch, set, train, val, &grid, seed)?;
            Ok((Predictor::Network(m), Some(report)))
        }
    }
}
