//! Central finite-difference gradient checking.

use rand::Rng;

use crate::nn::params::{Grads, ParamId, ParamSet};

/// Loss, analytic gradients and ReLU sign signature at one parameter point.
pub struct Evaluation {
    pub loss: f64,
    pub grads: Grads,
    pub signature: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates skipped because a ReLU changed sign within `±eps`.
    pub skipped: usize,
}

/// Relative error with a floor on the denominator so that coordinates whose
/// true gradient is zero do not divide rounding noise by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

/// Compare analytic gradients against central differences on `samples`
/// randomly chosen scalar parameters.
pub fn gradient_check<F, R>(params: &ParamSet, eval: F, samples: usize, eps: f64, rng: &mut R) -> GradCheckReport
where
    F: Fn(&ParamSet) -> Evaluation,
    R: Rng + ?Sized,
{
    let base = eval(params);
    let coords: Vec<(ParamId, usize)> =
        params.ids().flat_map(|id| (0..params.get(id).len()).map(move |k| (id, k))).collect();
    let mut report = GradCheckReport { max_relative_error: 0.0, checked: 0, skipped: 0 };
    if coords.is_empty() {
        return report;
    }
    let mut work = params.clone();
    let mut attempts = 0;
    while report.checked < samples && attempts < samples * 20 {
        attempts += 1;
        let (id, k) = coords[rng.random_range(0..coords.len())];
        let original = work.get(id).data()[k];
        work.get_mut(id).data_mut()[k] = original + eps;
        let plus = eval(&work);
        work.get_mut(id).data_mut()[k] = original - eps;
        let minus = eval(&work);
        work.get_mut(id).data_mut()[k] = original;
        if plus.signature != base.signature || minus.signature != base.signature {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * eps);
        let analytic = base.grads.get(id).data()[k];
        report.max_relative_error = report.max_relative_error.max(relative_error(analytic, numeric));
        report.checked += 1;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Graph;
    use crate::nn::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn linear_layer_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new();
        let w = ps.add("w", random(&mut rng, 4, 3));
        let b = ps.add("b", random(&mut rng, 1, 3));
        let x = random(&mut rng, 5, 4);
        let proj = random(&mut rng, 5, 3);
        let eval = |p: &ParamSet| {
            let mut g = Graph::new(p);
            let xi = g.input(x.clone());
            let (wv, bv) = (g.param(w), g.param(b));
            let h = g.matmul(xi, wv);
            let h = g.add_row(h, bv);
            let l = g.weighted_sum(h, proj.clone());
            Evaluation { loss: g.value(l).item(), grads: g.backward(l), signature: g.relu_signature() }
        };
        let r = gradient_check(&ps, eval, 15, 1e-5, &mut rng);
        assert_eq!(r.checked, 15);
        assert!(r.max_relative_error < 1e-9, "{r:?}");
    }
}
