//! Named parameter storage and matching gradient buffers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param { name: name.into(), value });
        ParamId(self.params.len() - 1)
    }

    /// He-style normal initialization for a `fan_in x fan_out` weight.
    pub fn add_weight<R: Rng + ?Sized>(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> ParamId {
        let sd = (2.0 / fan_in.max(1) as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("finite sd");
        let data = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
        self.add(name, Tensor::from_vec(fan_in, fan_out, data))
    }

    /// Small-scale normal initialization, for embeddings.
    pub fn add_normal<R: Rng + ?Sized>(&mut self, name: &str, rows: usize, cols: usize, sd: f64, rng: &mut R) -> ParamId {
        let normal = Normal::new(0.0, sd).expect("finite sd");
        let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
        self.add(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn add_ones(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::filled(rows, cols, 1.0))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.params.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.data().iter().all(|x| x.is_finite()))
    }
}

/// Gradients laid out like a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Tensor>);

impl Grads {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.0[id.0]
    }
}
