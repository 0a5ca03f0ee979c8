//! Minibatch Adam training with validation early stopping and grid search.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, ModelInput, Normalizer, WindowTensor};
use crate::models::common::{Hyperparams, N_CLASSES};
use crate::models::network::{Network, NetworkArch, NetworkModel};
use crate::nn::{Adam, AdamConfig, Graph, ParamSet};
use crate::observation::{Dimension, Ratings};
use crate::rng::{rng_from, stream};

/// Loss curves for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub hyper: Hyperparams,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub arch: NetworkArch,
    pub set: FeatureSet,
    pub seed: u64,
    pub runs: Vec<GridRun>,
    pub selected: usize,
    pub selected_epoch: usize,
    pub hyper: Hyperparams,
}

/// Zero-based class targets for the three heads.
pub fn class_targets(r: &Ratings) -> Vec<usize> {
    Dimension::ALL.iter().map(|d| r.get(*d) as usize - 1).collect()
}

/// A featurized split ready for training.
pub struct Batchable<'a> {
    pub inputs: &'a [ModelInput],
    pub targets: &'a [Vec<usize>],
}

/// Mean evaluation-mode loss over a whole split.
pub fn mean_loss(net: &Network, params: &ParamSet, data: &Batchable<'_>, batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for (xs, ys) in data.inputs.chunks(batch).zip(data.targets.chunks(batch)) {
        let refs: Vec<&ModelInput> = xs.iter().collect();
        let mut g = Graph::new(params);
        let logits = net.forward(&mut g, &refs, None)?;
        let l = g.cross_entropy(logits, ys, N_CLASSES);
        total += g.value(l).item() * xs.len() as f64;
    }
    Ok(total / data.inputs.len() as f64)
}

/// Train one grid point. `gi` keys the random streams so that grid points
/// are independent of each other and of evaluation order.
#[allow(clippy::too_many_arguments)]
pub fn fit_grid_point(
    arch: NetworkArch,
    set: FeatureSet,
    crop_cells: usize,
    train: &Batchable<'_>,
    val: &Batchable<'_>,
    hp: &Hyperparams,
    seed: u64,
    gi: u64,
) -> Result<(ParamSet, Network, GridRun)> {
    if train.inputs.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if val.inputs.is_empty() {
        return Err(Error::EmptyInput("validation split"));
    }
    let mut init = rng_from(seed, &[stream::INIT, gi]);
    let (mut params, net) = Network::build(arch, set, crop_cells, hp, &mut init)?;
    let mut shuffle = rng_from(seed, &[stream::SHUFFLE, gi]);
    let mut drop = rng_from(seed, &[stream::DROPOUT, gi]);
    let mut adam = Adam::new(&params, AdamConfig::with_lr(hp.lr));

    let mut order: Vec<usize> = (0..train.inputs.len()).collect();
    let mut run = GridRun { hyper: *hp, train_loss: Vec::new(), val_loss: Vec::new(), best_epoch: 0, best_val_loss: f64::INFINITY };
    let mut best = params.clone();
    for epoch in 0..hp.max_epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(hp.batch_size) {
            let xs: Vec<&ModelInput> = idx.iter().map(|&i| &train.inputs[i]).collect();
            let ys: Vec<Vec<usize>> = idx.iter().map(|&i| train.targets[i].clone()).collect();
            let grads = {
                let mut g = Graph::new(&params);
                let logits = net.forward(&mut g, &xs, Some(&mut drop))?;
                let l = g.cross_entropy(logits, &ys, N_CLASSES);
                epoch_loss += g.value(l).item() * idx.len() as f64;
                g.backward(l)
            };
            adam.step(&mut params, &grads);
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("network parameters after an update"));
        }
        run.train_loss.push(epoch_loss / train.inputs.len() as f64);
        let v = mean_loss(&net, &params, val, hp.batch_size.max(64))?;
        run.val_loss.push(v);
        if v < run.best_val_loss {
            run.best_val_loss = v;
            run.best_epoch = epoch;
            best.clone_from(&params);
        } else if epoch - run.best_epoch > hp.patience {
            break;
        }
    }
    Ok((best, net, run))
}

/// Featurize, fit the normalizer on `train`, run every grid point and keep
/// the one with the lowest validation loss (earlier point on ties).
pub fn train_network(
    arch: NetworkArch,
    set: FeatureSet,
    train: &[WindowTensor],
    val: &[WindowTensor],
    grid: &[Hyperparams],
    seed: u64,
) -> Result<(NetworkModel, TrainReport)> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if !arch.supports(set) {
        return Err(Error::InvalidFeatureSet(format!("{arch} cannot use {set}")));
    }
    let normalizer = Normalizer::fit(train)?;
    let featurize = |ws: &[WindowTensor]| -> (Vec<ModelInput>, Vec<Vec<usize>>) {
        (ws.iter().map(|w| ModelInput::new(w, set, &normalizer)).collect(), ws.iter().map(|w| class_targets(&w.labels)).collect())
    };
    let (tx, ty) = featurize(train);
    let (vx, vy) = featurize(val);
    let crop_cells = train[0].crop_cells();
    let (tb, vb) = (Batchable { inputs: &tx, targets: &ty }, Batchable { inputs: &vx, targets: &vy });

    let results: Vec<Result<(ParamSet, Network, GridRun)>> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, hp)| fit_grid_point(arch, set, crop_cells, &tb, &vb, hp, seed, gi as u64))
        .collect();
    let mut fitted = Vec::with_capacity(results.len());
    for r in results {
        fitted.push(r?);
    }
    let mut selected = 0;
    for (i, (_, _, run)) in fitted.iter().enumerate() {
        if run.best_val_loss < fitted[selected].2.best_val_loss {
            selected = i;
        }
    }
    let runs: Vec<GridRun> = fitted.iter().map(|f| f.2.clone()).collect();
    let (params, network, run) = fitted.swap_remove(selected);
    let report = TrainReport {
        arch,
        set,
        seed,
        selected,
        selected_epoch: run.best_epoch,
        hyper: run.hyper,
        runs,
    };
    Ok((NetworkModel { set, hyper: run.hyper, normalizer, params, network }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::toy_input;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_split(n: usize, seed: u64) -> (Vec<ModelInput>, Vec<Vec<usize>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<ModelInput> = (0..n).map(|_| toy_input(FeatureSet::FacialOnly, &mut rng)).collect();
        let ys = (0..n).map(|_| (0..3).map(|_| rng.random_range(0..5)).collect()).collect();
        (xs, ys)
    }

    #[test]
    fn memorizes_ten_samples() {
        let (xs, ys) = toy_split(10, 0);
        let data = Batchable { inputs: &xs, targets: &ys };
        let hp = Hyperparams { lr: 3e-3, batch_size: 10, dropout: 0.0, hidden: 32, layers: 1, max_epochs: 500, patience: 500 };
        let (_, _, run) = fit_grid_point(NetworkArch::Mlp, FeatureSet::FacialOnly, 16, &data, &data, &hp, 7, 0).unwrap();
        let first = run.train_loss.iter().position(|&l| l < 0.01);
        assert!(first.is_some(), "final train loss {}", run.train_loss.last().unwrap());
    }

    #[test]
    fn zero_patience_stops_at_first_rise() {
        let (tx, ty) = toy_split(20, 1);
        let (vx, vy) = toy_split(10, 2);
        let hp = Hyperparams { lr: 1e-2, batch_size: 5, dropout: 0.0, hidden: 16, layers: 1, max_epochs: 200, patience: 0 };
        let (_, _, run) = fit_grid_point(
            NetworkArch::Mlp,
            FeatureSet::FacialOnly,
            16,
            &Batchable { inputs: &tx, targets: &ty },
            &Batchable { inputs: &vx, targets: &vy },
            &hp,
            3,
            0,
        )
        .unwrap();
        let n = run.val_loss.len();
        assert!(n < 200);
        for e in 1..n - 1 {
            assert!(run.val_loss[e] < run.val_loss[e - 1]);
        }
        assert!(run.val_loss[n - 1] >= run.val_loss[n - 2]);
        assert_eq!(run.best_epoch, n - 2);
    }

    #[test]
    fn selected_epoch_has_minimal_validation_loss() {
        let (tx, ty) = toy_split(20, 4);
        let (vx, vy) = toy_split(10, 5);
        let hp = Hyperparams { lr: 1e-2, batch_size: 4, dropout: 0.1, hidden: 16, layers: 1, max_epochs: 30, patience: 3 };
        let (_, _, run) = fit_grid_point(
            NetworkArch::Mlp,
            FeatureSet::FacialOnly,
            16,
            &Batchable { inputs: &tx, targets: &ty },
            &Batchable { inputs: &vx, targets: &vy },
            &hp,
            3,
            0,
        )
        .unwrap();
        let min = run.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(run.val_loss[run.best_epoch], min);
        assert_eq!(run.best_val_loss, min);
    }
}
