//! Minimal tensor library with reverse-mode autodiff, used by the networks.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod params;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradient_check, Evaluation, GradCheckReport};
pub use graph::{ConvShape, Graph, Var};
pub use params::{Grads, ParamId, ParamSet};
pub use tensor::Tensor;
