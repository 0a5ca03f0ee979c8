//! Multi-layer perceptron over the flattened window.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, ModelInput};
use crate::models::common::{dropout, Linear, N_LOGITS};
use crate::models::conv::{OccEncoder, OCC_EMBEDDING};
use crate::nn::{Graph, ParamSet, Tensor, Var};
use crate::observation::WINDOW_FRAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub set: FeatureSet,
    pub in_width: usize,
    pub occ: Option<OccEncoder>,
    pub layers: Vec<Linear>,
    pub head: Linear,
    pub dropout: f64,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamSet,
        set: FeatureSet,
        crop_cells: usize,
        hidden: usize,
        layers: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let in_width = WINDOW_FRAMES * set.dense_channels().len();
        let occ = set.uses_occupancy().then(|| OccEncoder::new(ps, crop_cells, rng));
        let mut width = in_width + if occ.is_some() { OCC_EMBEDDING } else { 0 };
        let mut hidden_layers = Vec::with_capacity(layers);
        for l in 0..layers {
            hidden_layers.push(Linear::new(ps, &format!("mlp.l{l}"), width, hidden, rng));
            width = hidden;
        }
        let head = Linear::new(ps, "mlp.head", width, N_LOGITS, rng);
        Mlp { set, in_width, occ, layers: hidden_layers, head, dropout }
    }

    pub fn forward(&self, g: &mut Graph, inputs: &[&ModelInput], mut rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let mut data = Vec::with_capacity(inputs.len() * self.in_width);
        for x in inputs {
            if x.set != self.set || x.seq.len() != self.in_width {
                return Err(Error::LengthMismatch { what: "mlp input width", expected: self.in_width, actual: x.seq.len() });
            }
            data.extend_from_slice(&x.seq);
        }
        let mut h = g.input(Tensor::from_vec(inputs.len(), self.in_width, data));
        if let Some(enc) = &self.occ {
            let crops: Vec<&[f64]> = inputs.iter().map(|x| x.crop.as_deref().expect("occupancy crop")).collect();
            let e = enc.forward(g, &crops);
            h = g.concat_cols(&[h, e]);
        }
        for layer in &self.layers {
            let z = layer.forward(g, h);
            let z = g.relu(z);
            h = dropout(g, z, self.dropout, rng.as_deref_mut());
        }
        Ok(self.head.forward(g, h))
    }
}
