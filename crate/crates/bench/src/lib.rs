//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use navimpress::features::{FeatureConfig, WindowTensor};
use navimpress::sim::{default_warehouse, run_session, tasks_for, SessionConfig};
use navimpress::OccupancyGrid;

pub struct Fixture {
    pub map: Arc<OccupancyGrid>,
    pub samples: Vec<navimpress::Sample>,
    pub windows: Vec<WindowTensor>,
}

/// A small seeded session on the built-in warehouse.
pub fn fixture(participants: usize) -> Fixture {
    let map = Arc::new(default_warehouse());
    let tasks = tasks_for(&map).expect("warehouse tasks");
    let config = SessionConfig { participants, seed: 1, ..SessionConfig::default() };
    let samples = run_session(Arc::clone(&map), &tasks, &config).expect("session").samples;
    let fc = FeatureConfig::default();
    let windows = samples.iter().map(|s| WindowTensor::from_sample(s, &map, &fc).expect("window")).collect();
    Fixture { map, samples, windows }
}
