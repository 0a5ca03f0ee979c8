//! The three differentiable architectures behind one interface.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, ModelInput, Normalizer, WindowTensor};
use crate::models::common::{classes_from_logits, Hyperparams, N_LOGITS};
use crate::models::gnn::Gnn;
use crate::models::mlp::Mlp;
use crate::models::transformer::{Transformer, HEADS};
use crate::nn::{Graph, ParamSet, Tensor, Var};
use crate::observation::Ratings;

const PREDICT_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetworkArch {
    Mlp,
    Gnn,
    Transformer,
}

impl NetworkArch {
    pub const ALL: [NetworkArch; 3] = [NetworkArch::Mlp, NetworkArch::Gnn, NetworkArch::Transformer];

    pub fn name(self) -> &'static str {
        match self {
            NetworkArch::Mlp => "mlp",
            NetworkArch::Gnn => "gnn",
            NetworkArch::Transformer => "transformer",
        }
    }

    /// Default sizes. The graph and attention models run per node or token,
    /// so they get a narrower width than the MLP.
    pub fn default_hyperparams(self) -> Hyperparams {
        match self {
            NetworkArch::Mlp => Hyperparams::default(),
            NetworkArch::Gnn | NetworkArch::Transformer => Hyperparams { hidden: 16, ..Hyperparams::default() },
        }
    }

    pub fn supports(self, set: FeatureSet) -> bool {
        !(self == NetworkArch::Gnn && !set.uses_occupancy())
    }
}

impl fmt::Display for NetworkArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NetworkArch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(NetworkArch::Mlp),
            "gnn" => Ok(NetworkArch::Gnn),
            "transformer" => Ok(NetworkArch::Transformer),
            other => Err(Error::Config(format!("unknown network '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Network {
    Mlp(Mlp),
    Gnn(Gnn),
    Transformer(Transformer),
}

impl Network {
    pub fn build<R: Rng + ?Sized>(
        arch: NetworkArch,
        set: FeatureSet,
        crop_cells: usize,
        hp: &Hyperparams,
        rng: &mut R,
    ) -> Result<(ParamSet, Network)> {
        hp.validate()?;
        let mut ps = ParamSet::new();
        let net = match arch {
            NetworkArch::Mlp => Network::Mlp(Mlp::new(&mut ps, set, crop_cells, hp.hidden, hp.layers, hp.dropout, rng)),
            NetworkArch::Gnn => Network::Gnn(Gnn::new(&mut ps, set, crop_cells, hp.hidden, hp.layers, hp.dropout, rng)?),
            NetworkArch::Transformer => Network::Transformer(Transformer::new(
                &mut ps,
                set,
                crop_cells,
                hp.hidden,
                HEADS,
                2 * hp.hidden,
                hp.layers,
                hp.dropout,
                rng,
            )?),
        };
        Ok((ps, net))
    }

    pub fn arch(&self) -> NetworkArch {
        match self {
            Network::Mlp(_) => NetworkArch::Mlp,
            Network::Gnn(_) => NetworkArch::Gnn,
            Network::Transformer(_) => NetworkArch::Transformer,
        }
    }

    /// `batch x 15` logits. Passing an rng switches dropout on.
    pub fn forward(&self, g: &mut Graph, inputs: &[&ModelInput], rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("network batch"));
        }
        match self {
            Network::Mlp(m) => m.forward(g, inputs, rng),
            Network::Gnn(m) => m.forward(g, inputs, rng),
            Network::Transformer(m) => m.forward(g, inputs, rng),
        }
    }

    /// Evaluation-mode logits, computed in fixed-size batches.
    pub fn logits(&self, params: &ParamSet, inputs: &[&ModelInput]) -> Result<Tensor> {
        let mut out = Tensor::zeros(inputs.len(), N_LOGITS);
        for (c, chunk) in inputs.chunks(PREDICT_BATCH).enumerate() {
            let mut g = Graph::new(params);
            let v = self.forward(&mut g, chunk, None)?;
            for (i, row) in (0..chunk.len()).map(|i| g.value(v).row(i)).enumerate() {
                out.row_mut(c * PREDICT_BATCH + i).copy_from_slice(row);
            }
        }
        Ok(out)
    }
}

/// A trained network with everything needed to featurize new windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub set: FeatureSet,
    pub hyper: Hyperparams,
    pub normalizer: Normalizer,
    pub params: ParamSet,
    pub network: Network,
}

impl NetworkModel {
    pub fn arch(&self) -> NetworkArch {
        self.network.arch()
    }

    pub fn inputs(&self, windows: &[WindowTensor]) -> Vec<ModelInput> {
        windows.iter().map(|w| ModelInput::new(w, self.set, &self.normalizer)).collect()
    }

    pub fn logits(&self, windows: &[WindowTensor]) -> Result<Tensor> {
        let inputs = self.inputs(windows);
        let refs: Vec<&ModelInput> = inputs.iter().collect();
        self.network.logits(&self.params, &refs)
    }

    pub fn predict(&self, windows: &[WindowTensor]) -> Result<Vec<Ratings>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.logits(windows)?;
        (0..windows.len()).map(|i| Ratings::from_classes(classes_from_logits(logits.row(i)))).collect()
    }
}
