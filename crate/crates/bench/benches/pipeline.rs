use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use navimpress::features::{fit_normalizer, FeatureConfig, FeatureSet, ModelInput, WindowTensor};
use navimpress::models::{train_random_forest, ForestConfig, Hyperparams, Network, NetworkArch};
use navimpress::sim::{build_social_costmap, default_warehouse, plan_path, tasks_for, SocialCostParams};
use navimpress::Pose2D;
use navimpress_bench::fixture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planner(c: &mut Criterion) {
    let map = Arc::new(default_warehouse());
    let task = tasks_for(&map).unwrap()[0];
    let peds: Vec<Pose2D> = (0..10).map(|i| Pose2D::new(task.start.x + 1.0 + i as f64, task.start.y + 0.5, 0.0)).collect();
    let costs = build_social_costmap(&map, &peds, &SocialCostParams::default());
    c.bench_function("plan_path/warehouse", |b| b.iter(|| plan_path(black_box(&costs), &task.start, &task.goal).unwrap()));
    c.bench_function("costmap/10_pedestrians", |b| {
        b.iter(|| build_social_costmap(black_box(&map), &peds, &SocialCostParams::default()))
    });
}

fn features(c: &mut Criterion) {
    let f = fixture(1);
    let fc = FeatureConfig::default();
    c.bench_function("window_tensor/from_sample", |b| {
        b.iter(|| WindowTensor::from_sample(black_box(&f.samples[0]), &f.map, &fc).unwrap())
    });
    let norm = fit_normalizer(&f.windows).unwrap();
    c.bench_function("model_input/both", |b| {
        b.iter(|| ModelInput::new(black_box(&f.windows[0]), FeatureSet::NavPlusFacial, &norm))
    });
}

fn forest(c: &mut Criterion) {
    let f = fixture(2);
    let cfg = ForestConfig { n_trees: 10, ..ForestConfig::default() };
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("fit/nav/10_trees", |b| {
        b.iter(|| train_random_forest(black_box(&f.windows), FeatureSet::NavOnly, &cfg, 0).unwrap())
    });
    let model = train_random_forest(&f.windows, FeatureSet::NavOnly, &cfg, 0).unwrap();
    group.bench_function("predict/nav/10_trees", |b| b.iter(|| model.predict(black_box(&f.windows)).unwrap()));
    group.finish();
}

fn networks(c: &mut Criterion) {
    let f = fixture(1);
    let norm = fit_normalizer(&f.windows).unwrap();
    let inputs: Vec<ModelInput> =
        f.windows.iter().take(32).map(|w| ModelInput::new(w, FeatureSet::NavPlusFacial, &norm)).collect();
    let refs: Vec<&ModelInput> = inputs.iter().collect();
    let crop = inputs[0].crop_cells;
    let mut group = c.benchmark_group("forward/batch_32");
    group.sample_size(10);
    for arch in NetworkArch::ALL {
        let hp: Hyperparams = arch.default_hyperparams();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (params, net) = Network::build(arch, FeatureSet::NavPlusFacial, crop, &hp, &mut rng).unwrap();
        group.bench_function(arch.name(), |b| {
            b.iter_batched(|| (), |_| net.logits(&params, black_box(&refs)).unwrap(), BatchSize::SmallInput)
        });
    }
    group.finish();
}

criterion_group!(benches, planner, features, forest, networks);
criterion_main!(benches);
