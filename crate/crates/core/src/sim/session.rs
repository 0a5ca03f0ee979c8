//! A full study session: every participant performs every task.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::observation::Sample;
use crate::rng::{derive_seed, rng_from, stream};
use crate::sim::behavior::BehaviorKind;
use crate::sim::episode::{run_episode, EpisodeEnd, EpisodeResult, ScenarioConfig, SimParams};
use crate::sim::impression::{ImpressionTraits, TraitDistribution};
use crate::sim::warehouse::Task;

/// Queries per episode that make the default 60 x 4 session yield 2969
/// samples.
pub const DEFAULT_QUERIES_PER_EPISODE: f64 = 2969.0 / 240.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub participants: usize,
    pub tasks: usize,
    pub seed: u64,
    /// Average number of queries per episode; `None` queries at every pause.
    pub queries_per_episode: Option<f64>,
    pub traits: TraitDistribution,
    pub params: SimParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            participants: 60,
            tasks: 4,
            seed: 0,
            queries_per_episode: Some(DEFAULT_QUERIES_PER_EPISODE),
            traits: TraitDistribution::default(),
            params: SimParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub participant_id: String,
    pub task_id: u32,
    pub samples: usize,
    pub end: EpisodeEnd,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub samples: Vec<Sample>,
    /// Behavior in control at each sample's pause, aligned with `samples`.
    pub behaviors: Vec<BehaviorKind>,
    pub traits: Vec<ImpressionTraits>,
    pub episodes: Vec<EpisodeSummary>,
}

pub fn participant_id(index: usize) -> String {
    format!("p{index:02}")
}

/// Per-episode query budgets: the rounded total is spread as evenly as
/// possible, with the remainder assigned to a seeded random subset.
pub fn query_budgets(episodes: usize, per_episode: f64, seed: u64) -> Vec<usize> {
    let total = (per_episode * episodes as f64).round() as usize;
    let base = total / episodes.max(1);
    let extra = total - base * episodes;
    let mut order: Vec<usize> = (0..episodes).collect();
    order.shuffle(&mut rng_from(seed, &[stream::QUERY_BUDGET]));
    let mut budgets = vec![base; episodes];
    for &i in &order[..extra] {
        budgets[i] += 1;
    }
    budgets
}

/// Run every (participant, task) episode. Episodes are independent and run
/// in parallel; the output order is participant-major and deterministic.
pub fn run_session(map: Arc<OccupancyGrid>, tasks: &[Task], config: &SessionConfig) -> Result<SessionResult> {
    if config.participants == 0 || config.tasks == 0 {
        return Err(Error::Config("participants and tasks must be positive".into()));
    }
    if tasks.is_empty() {
        return Err(Error::Config("no tasks defined for the map".into()));
    }
    if let Some(q) = config.queries_per_episode {
        if !(q > 0.0) {
            return Err(Error::Config("queries_per_episode must be positive".into()));
        }
    }
    let traits: Vec<ImpressionTraits> = (0..config.participants)
        .map(|i| config.traits.sample(&mut rng_from(config.seed, &[stream::PARTICIPANT, i as u64])))
        .collect();
    let n = config.participants * config.tasks;
    let budgets = config.queries_per_episode.map(|q| query_budgets(n, q, config.seed));

    let results: Vec<Result<EpisodeResult>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / config.tasks, k % config.tasks);
            let task = tasks[j % tasks.len()];
            let scenario = ScenarioConfig {
                map: Arc::clone(&map),
                participant_id: participant_id(i),
                task_id: j as u32,
                start: task.start,
                goal: task.goal,
                routes: None,
                traits: traits[i],
                query_budget: budgets.as_ref().map(|b| b[k]),
                params: config.params.clone(),
            };
            run_episode(&scenario, derive_seed(config.seed, &[stream::EPISODE, i as u64, j as u64]))
        })
        .collect();

    let mut samples = Vec::new();
    let mut behaviors = Vec::new();
    let mut episodes = Vec::with_capacity(n);
    for (k, r) in results.into_iter().enumerate() {
        let r = r?;
        episodes.push(EpisodeSummary {
            participant_id: participant_id(k / config.tasks),
            task_id: (k % config.tasks) as u32,
            samples: r.samples.len(),
            end: r.end,
            seconds: r.ticks as f64 / crate::observation::FRAME_RATE_HZ,
        });
        behaviors.extend(r.pauses.iter().map(|p| p.behavior_at_pause));
        samples.extend(r.samples);
    }
    Ok(SessionResult { samples, behaviors, traits, episodes })
}
