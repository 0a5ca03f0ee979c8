//! Shared fixtures for the model unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureSet, ModelInput};
use crate::nn::gradcheck::{gradient_check, Evaluation, GradCheckReport};
use crate::nn::{Graph, ParamSet, Tensor, Var};
use crate::observation::WINDOW_FRAMES;

pub fn toy_input(set: FeatureSet, rng: &mut ChaCha8Rng) -> ModelInput {
    let width = set.dense_channels().len();
    ModelInput {
        set,
        seq: (0..WINDOW_FRAMES * width).map(|_| rng.random_range(-1.0..1.0)).collect(),
        frames: WINDOW_FRAMES,
        width,
        crop: set.uses_occupancy().then(|| (0..16 * 16).map(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)]).collect()),
        crop_cells: 16,
    }
}

pub fn randomize(ps: &mut ParamSet, rng: &mut ChaCha8Rng, scale: f64) {
    for id in ps.ids().collect::<Vec<_>>() {
        ps.get_mut(id).data_mut().iter_mut().for_each(|x| *x = rng.random_range(-scale..scale));
    }
}

/// Gradient check of a random linear functional of the network output.
pub fn check_gradients<F>(ps: &ParamSet, forward: F, rng: &mut ChaCha8Rng) -> GradCheckReport
where
    F: Fn(&mut Graph) -> Var,
{
    let shape = {
        let mut g = Graph::new(ps);
        let out = forward(&mut g);
        g.value(out).shape()
    };
    let proj = Tensor::from_vec(shape.0, shape.1, (0..shape.0 * shape.1).map(|_| rng.random_range(-1.0..1.0)).collect());
    let eval = |p: &ParamSet| {
        let mut g = Graph::new(p);
        let out = forward(&mut g);
        let l = g.weighted_sum(out, proj.clone());
        Evaluation { loss: g.value(l).item(), grads: g.backward(l), signature: g.relu_signature() }
    };
    gradient_check(ps, eval, 150, 1e-5, rng)
}
