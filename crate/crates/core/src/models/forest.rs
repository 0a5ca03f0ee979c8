//! Random forests of fully grown Gini trees, one forest per rating dimension.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, WindowTensor, DENSE_CHANNELS};
use crate::models::common::{N_CLASSES, N_HEADS};
use crate::observation::{Dimension, Ratings};
use crate::rng::{rng_from, stream};

/// Block size of the max-pooling applied to the final occupancy crop.
pub const CROP_POOL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, bootstrap: true, max_features: None }
    }
}

/// Dense row-major `f32` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch { what: "feature row", expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix { rows: rows.len(), cols, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }
}

/// Max-pool a `side x side` crop over `block x block` tiles (edge tiles may
/// be partial).
pub fn max_pool(crop: &[f64], side: usize, block: usize) -> Vec<f64> {
    let n = side.div_ceil(block);
    let mut out = vec![f64::NEG_INFINITY; n * n];
    for y in 0..side {
        for x in 0..side {
            let o = &mut out[(y / block) * n + x / block];
            *o = o.max(crop[y * side + x]);
        }
    }
    out
}

/// Raw (unnormalized) window features for the set, flattened over frames,
/// followed by the pooled final crop when the set uses the map.
pub fn forest_features(window: &WindowTensor, set: FeatureSet) -> Vec<f32> {
    let ch = set.dense_channels();
    let mut out = Vec::with_capacity(window.frames() * ch.len() + 64);
    for row in window.dense.chunks_exact(DENSE_CHANNELS) {
        out.extend(row[ch.clone()].iter().map(|&v| v as f32));
    }
    if set.uses_occupancy() {
        out.extend(max_pool(&window.final_crop(), window.crop_cells(), CROP_POOL).into_iter().map(|v| v as f32));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: u8 },
    Split { feature: u32, threshold: f32, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

fn majority(counts: &[usize]) -> u8 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u8
}

fn gini_sum(counts: &[usize], n: usize) -> f64 {
    // n * gini(counts), so that child impurities add directly.
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

struct Builder<'a, R> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    classes: usize,
    max_features: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    /// Best `(feature, threshold, impurity)` among `features` for `idx`.
    fn best_split(&self, idx: &[usize], features: &[usize], parent: f64) -> Option<(usize, f32, f64)> {
        let n = idx.len();
        let mut best: Option<(usize, f32, f64)> = None;
        let mut pairs: Vec<(f32, u8)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            let mut left = vec![0usize; self.classes];
            let mut right = vec![0usize; self.classes];
            for &(_, c) in &pairs {
                right[c as usize] += 1;
            }
            for k in 0..n - 1 {
                let c = pairs[k].1 as usize;
                left[c] += 1;
                right[c] -= 1;
                if pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let imp = gini_sum(&left, k + 1) + gini_sum(&right, n - k - 1);
                if imp < parent - 1e-12 && best.is_none_or(|b| imp < b.2) {
                    let mut thr = pairs[k].0 + (pairs[k + 1].0 - pairs[k].0) / 2.0;
                    if !(thr > pairs[k].0) || thr > pairs[k + 1].0 {
                        thr = pairs[k + 1].0;
                    }
                    best = Some((f, thr, imp));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>) -> u32 {
        let at = self.nodes.len();
        let mut counts = vec![0usize; self.classes];
        for &i in &idx {
            counts[self.y[i] as usize] += 1;
        }
        let class = majority(&counts);
        self.nodes.push(Node::Leaf { class });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if idx.len() < 2 || pure {
            return at as u32;
        }
        let parent = gini_sum(&counts, idx.len());
        let d = self.x.cols;
        let candidates: Vec<usize> = sample(self.rng, d, self.max_features.min(d)).into_vec();
        let split = self.best_split(&idx, &candidates, parent).or_else(|| {
            let all: Vec<usize> = (0..d).collect();
            self.best_split(&idx, &all, parent)
        });
        let Some((feature, threshold, _)) = split else {
            return at as u32;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature) < threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[at] = Node::Split { feature: feature as u32, threshold, left, right };
        at as u32
    }
}

impl DecisionTree {
    pub fn fit<R: Rng>(x: &FeatureMatrix, y: &[u8], idx: Vec<usize>, classes: usize, max_features: usize, rng: &mut R) -> Self {
        let mut b = Builder { x, y, classes, max_features: max_features.max(1), rng, nodes: Vec::new() };
        b.grow(idx);
        DecisionTree { nodes: b.nodes }
    }

    pub fn predict(&self, row: &[f32]) -> u8 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    k = if row[feature as usize] < threshold { left } else { right } as usize;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Rows are put into a canonical order first, so the fitted forest does
    /// not depend on the order of the training set.
    pub fn fit(x: &FeatureMatrix, y: &[u8], classes: usize, config: &ForestConfig, seed: u64) -> Result<Self> {
        if x.rows == 0 {
            return Err(Error::EmptyInput("forest training set"));
        }
        if y.len() != x.rows {
            return Err(Error::LengthMismatch { what: "forest labels", expected: x.rows, actual: y.len() });
        }
        if let Some(&bad) = y.iter().find(|&&c| c as usize >= classes) {
            return Err(Error::Config(format!("class {bad} outside 0..{classes}")));
        }
        if x.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forest features"));
        }
        let mut order: Vec<usize> = (0..x.rows).collect();
        order.sort_by(|&a, &b| {
            x.row(a)
                .iter()
                .zip(x.row(b))
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(y[a].cmp(&y[b]))
        });
        let m = config.max_features.unwrap_or_else(|| (x.cols as f64).sqrt().floor() as usize).max(1);
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from(seed, &[stream::FOREST, t as u64]);
                let idx: Vec<usize> = if config.bootstrap {
                    (0..x.rows).map(|_| order[rng.random_range(0..x.rows)]).collect()
                } else {
                    order.clone()
                };
                DecisionTree::fit(x, y, idx, classes, m, &mut rng)
            })
            .collect();
        Ok(RandomForest { classes, trees })
    }

    /// Majority vote; ties go to the smaller class.
    pub fn predict(&self, row: &[f32]) -> u8 {
        let mut votes = vec![0usize; self.classes];
        for t in &self.trees {
            votes[t.predict(row) as usize] += 1;
        }
        majority(&votes)
    }
}

/// Three forests over the same features, one per rating dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub set: FeatureSet,
    pub config: ForestConfig,
    pub forests: Vec<RandomForest>,
}

impl ForestModel {
    pub fn predict(&self, windows: &[WindowTensor]) -> Result<Vec<Ratings>> {
        windows
            .iter()
            .map(|w| {
                let row = forest_features(w, self.set);
                let c: Vec<usize> = self.forests.iter().map(|f| f.predict(&row) as usize).collect();
                Ratings::from_classes([c[0], c[1], c[2]])
            })
            .collect()
    }
}

pub fn train_random_forest(train: &[WindowTensor], set: FeatureSet, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if train.is_empty() {
        return Err(Error::EmptyInput("forest training set"));
    }
    let rows: Vec<Vec<f32>> = train.iter().map(|w| forest_features(w, set)).collect();
    let x = FeatureMatrix::from_rows(&rows)?;
    drop(rows);
    let forests = Dimension::ALL
        .iter()
        .map(|d| {
            let y: Vec<u8> = train.iter().map(|w| w.labels.get(*d) - 1).collect();
            RandomForest::fit(&x, &y, N_CLASSES, config, crate::rng::derive_seed(seed, &[d.index() as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(forests.len(), N_HEADS);
    Ok(ForestModel { set, config: *config, forests })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn xor(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let (a, b): (f32, f32) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            rows.push(vec![a, b]);
            y.push(u8::from((a > 0.0) != (b > 0.0)));
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn learns_xor() {
        let (x, y) = xor(200, 1);
        let rf = RandomForest::fit(&x, &y, 2, &ForestConfig::default(), 3).unwrap();
        let (tx, ty) = xor(1000, 2);
        let correct = (0..tx.rows).filter(|&i| rf.predict(tx.row(i)) == ty[i]).count();
        assert!(correct as f64 / tx.rows as f64 >= 0.95, "{correct}");
    }

    #[test]
    fn single_class_is_constant() {
        let (x, _) = xor(50, 4);
        let y = vec![3u8; 50];
        let rf = RandomForest::fit(&x, &y, 5, &ForestConfig { n_trees: 5, ..Default::default() }, 0).unwrap();
        assert!(rf.trees.iter().all(|t| t.nodes.len() == 1));
        let (tx, _) = xor(20, 5);
        assert!((0..20).all(|i| rf.predict(tx.row(i)) == 3));
    }

    #[test]
    fn one_unbootstrapped_tree_memorizes() {
        let (x, _) = xor(100, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y: Vec<u8> = (0..100).map(|_| rng.random_range(0..5)).collect();
        let cfg = ForestConfig { n_trees: 1, bootstrap: false, max_features: None };
        let rf = RandomForest::fit(&x, &y, 5, &cfg, 0).unwrap();
        assert!((0..100).all(|i| rf.predict(x.row(i)) == y[i]));
    }

    #[test]
    fn vote_ties_go_to_smaller_class() {
        assert_eq!(majority(&[0, 2, 2, 1]), 1);
        let rf = RandomForest {
            classes: 3,
            trees: vec![DecisionTree { nodes: vec![Node::Leaf { class: 2 }] }, DecisionTree { nodes: vec![Node::Leaf { class: 0 }] }],
        };
        assert_eq!(rf.predict(&[]), 0);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let x = FeatureMatrix { rows: 0, cols: 2, data: vec![] };
        assert!(RandomForest::fit(&x, &[], 2, &ForestConfig::default(), 0).is_err());
    }

    #[test]
    fn pooling_takes_block_maxima() {
        let crop: Vec<f64> = (0..16).map(|i| if i == 5 { 1.0 } else { 0.0 }).collect();
        assert_eq!(max_pool(&crop, 4, 2), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(max_pool(&crop, 4, 3), vec![1.0, 0.0, 0.0, 0.0]);
    }
}
