//! Occupancy-crop encoder: three stride-2 convolutions, global average
//! pooling and a dense projection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::common::Linear;
use crate::nn::{ConvShape, Graph, ParamId, ParamSet, Tensor, Var};

pub const OCC_EMBEDDING: usize = 64;
const CHANNELS: [usize; 4] = [1, 4, 8, 16];
const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccEncoder {
    pub crop_cells: usize,
    pub kernels: Vec<ParamId>,
    pub biases: Vec<ParamId>,
    pub out: Linear,
}

impl OccEncoder {
    pub fn new<R: Rng + ?Sized>(ps: &mut ParamSet, crop_cells: usize, rng: &mut R) -> Self {
        let mut kernels = Vec::new();
        let mut biases = Vec::new();
        for l in 0..3 {
            let fan_in = CHANNELS[l] * KERNEL * KERNEL;
            let w = ps.add_weight(&format!("occ.conv{l}.w"), fan_in, CHANNELS[l + 1], rng);
            // Stored as out_channels x patch.
            let t = ps.get(w).transpose();
            *ps.get_mut(w) = t;
            kernels.push(w);
            biases.push(ps.add_zeros(&format!("occ.conv{l}.b"), CHANNELS[l + 1], 1));
        }
        let out = Linear::new(ps, "occ.out", CHANNELS[3], OCC_EMBEDDING, rng);
        OccEncoder { crop_cells, kernels, biases, out }
    }

    /// Embed a batch of `crop_cells²` crops into a `batch x 64` matrix.
    pub fn forward(&self, g: &mut Graph, crops: &[&[f64]]) -> Var {
        let n = self.crop_cells;
        let mut data = Vec::with_capacity(crops.len() * n * n);
        for c in crops {
            assert_eq!(c.len(), n * n, "crop size mismatch");
            data.extend_from_slice(c);
        }
        let mut x = g.input(Tensor::from_vec(1, crops.len() * n * n, data));
        let mut side = n;
        for l in 0..3 {
            let shape = ConvShape {
                batch: crops.len(),
                in_channels: CHANNELS[l],
                height: side,
                width: side,
                kernel: KERNEL,
                stride: 2,
                padding: 1,
            };
            let w = g.param(self.kernels[l]);
            let b = g.param(self.biases[l]);
            let y = g.conv2d(x, w, shape);
            let y = g.add_col(y, b);
            x = g.relu(y);
            side = shape.out_height();
        }
        let pooled = g.pool_blocks(x, side * side);
        self.out.forward(g, pooled)
    }
}
