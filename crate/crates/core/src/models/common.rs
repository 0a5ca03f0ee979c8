//! Pieces shared by the network architectures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, ParamId, ParamSet, Tensor, Var};

pub const N_HEADS: usize = 3;
pub const N_CLASSES: usize = 5;
pub const N_LOGITS: usize = N_HEADS * N_CLASSES;

/// Training-time knobs. `hidden` and `layers` size the network; the rest
/// drive the optimizer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub layers: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { lr: 1e-3, batch_size: 32, dropout: 0.1, hidden: 64, layers: 2, max_epochs: 100, patience: 10 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch_size == 0 || self.hidden == 0 || self.layers == 0 || self.max_epochs == 0 {
            return Err(Error::Config(format!("hyperparameters must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Cartesian product of learning rates, batch sizes and dropout rates over
/// a base configuration.
pub fn hyper_grid(base: Hyperparams, lrs: &[f64], batches: &[usize], dropouts: &[f64]) -> Vec<Hyperparams> {
    let mut out = Vec::new();
    for &lr in lrs {
        for &batch_size in batches {
            for &dropout in dropouts {
                out.push(Hyperparams { lr, batch_size, dropout, ..base });
            }
        }
    }
    out
}

pub fn default_grid() -> Vec<Hyperparams> {
    hyper_grid(Hyperparams::default(), &[1e-3, 3e-4], &[32, 64], &[0.1, 0.3])
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-head class predictions (0-based) from a row of 15 logits.
pub fn classes_from_logits(row: &[f64]) -> [usize; N_HEADS] {
    std::array::from_fn(|h| argmax(&row[h * N_CLASSES..(h + 1) * N_CLASSES]))
}

/// Inverted dropout. With no rng (evaluation) or `p == 0` it is the identity.
pub fn dropout<R: Rng + ?Sized>(g: &mut Graph, x: Var, p: f64, rng: Option<&mut R>) -> Var {
    match rng {
        Some(rng) if p > 0.0 => {
            let (r, c) = g.value(x).shape();
            let keep = 1.0 / (1.0 - p);
            let mask = (0..r * c).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
            g.mul_const(x, Tensor::from_vec(r, c, mask))
        }
        _ => x,
    }
}

/// Dense layer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(ps: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let w = ps.add_weight(&format!("{name}.w"), fan_in, fan_out, rng);
        let b = ps.add_zeros(&format!("{name}.b"), 1, fan_out);
        Linear { w, b }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let (w, b) = (g.param(self.w), g.param(self.b));
        let h = g.matmul(x, w);
        g.add_row(h, b)
    }
}
