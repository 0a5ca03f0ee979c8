//! One guided-navigation task: the robot leads the user toward a goal while
//! cycling through scripted behaviors, pausing for rating queries.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2D, PUBLIC_SPACE_RADIUS};
use crate::grid::OccupancyGrid;
use crate::observation::{FrameObservation, Phase, Sample, FRAME_RATE_HZ, WINDOW_FRAMES};
use crate::rng::{derive_seed, stream};
use crate::sim::behavior::{next_behavior, BehaviorKind};
use crate::sim::costmap::{CostGrid, SocialCostParams};
use crate::sim::impression::{BehaviorMix, ImpressionModel, ImpressionTraits};
use crate::sim::pedestrians::{random_routes, Pedestrian, PedestrianRoute};
use crate::sim::planner::{plan_cells, GridPath};
use crate::sim::robot::{plan_wrong_way, step_robot, Kinematics, PathFollower};
use crate::sim::user::{blend_response, gaze_toward, Trail, UserFollower, UserModelConfig};

/// Ticks before a switch at which the Before query happens.
pub const BEFORE_OFFSET_TICKS: u64 = 20;
/// Ticks after a switch at which the After query happens.
pub const AFTER_OFFSET_TICKS: u64 = 40;
const POSE_QUANTUM: f64 = 1e-6;

/// Tunable simulator constants shared by every episode of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub kinematics: Kinematics,
    pub social: SocialCostParams,
    pub user: UserModelConfig,
    pub impression: ImpressionModel,
    pub pedestrian_count: usize,
    /// Episode length cap in seconds.
    pub max_duration: f64,
    /// NavStack replanning period in seconds.
    pub replan_interval: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            kinematics: Kinematics::default(),
            social: SocialCostParams::default(),
            user: UserModelConfig::default(),
            impression: ImpressionModel::default(),
            pedestrian_count: 10,
            max_duration: 300.0,
            replan_interval: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub map: Arc<OccupancyGrid>,
    pub participant_id: String,
    pub task_id: u32,
    pub start: Pose2D,
    pub goal: Pose2D,
    /// Explicit pedestrian loops; `None` draws `pedestrian_count` random ones.
    pub routes: Option<Vec<PedestrianRoute>>,
    pub traits: ImpressionTraits,
    /// Stop after this many queries.
    pub query_budget: Option<usize>,
    pub params: SimParams,
}

impl ScenarioConfig {
    pub fn new(map: Arc<OccupancyGrid>, start: Pose2D, goal: Pose2D) -> Self {
        ScenarioConfig {
            map,
            participant_id: "p0".into(),
            task_id: 0,
            start,
            goal,
            routes: None,
            traits: ImpressionTraits::neutral(),
            query_budget: None,
            params: SimParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [("start", &self.start), ("goal", &self.goal)] {
            if !p.is_finite() {
                return Err(Error::NonFinite(what));
            }
            if !self.map.is_free_at(p.x, p.y) {
                return Err(Error::BlockedPose { x: p.x, y: p.y });
            }
        }
        let p = &self.params;
        if !(p.max_duration > 0.0) || !(p.replan_interval > 0.0) {
            return Err(Error::Config("max_duration and replan_interval must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.traits.expressiveness) || !(self.traits.noise_scale >= 0.0) {
            return Err(Error::Config("expressiveness must lie in [0, 1] and noise scale be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseEvent {
    pub t: f64,
    pub tick: u64,
    pub phase: Phase,
    pub behavior_at_pause: BehaviorKind,
}

/// Ticks `start_tick + 1 ..= end_tick` are driven by `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorInterval {
    pub kind: BehaviorKind,
    pub start_tick: u64,
    pub end_tick: u64,
    /// Cut short by the end of the episode.
    pub truncated: bool,
}

impl BehaviorInterval {
    pub fn duration(&self) -> f64 {
        (self.end_tick - self.start_tick) as f64 / FRAME_RATE_HZ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeEnd {
    GoalReached,
    DurationCap,
    QueryBudget,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub samples: Vec<Sample>,
    pub pauses: Vec<PauseEvent>,
    pub behaviors: Vec<BehaviorInterval>,
    pub end: EpisodeEnd,
    pub ticks: u64,
    /// Largest user-robot distance seen, meters.
    pub max_user_distance: f64,
    /// Every user position landed on a Free cell.
    pub user_always_free: bool,
}

fn tick_time(tick: u64) -> f64 {
    tick as f64 / FRAME_RATE_HZ
}

fn quantize(v: f64) -> f64 {
    (v / POSE_QUANTUM).round() * POSE_QUANTUM
}

fn quantize_pose(p: &Pose2D) -> Pose2D {
    Pose2D::new(quantize(p.x), quantize(p.y), p.theta)
}

fn cell_index(costs: &CostGrid, pose: &Pose2D) -> Result<usize> {
    let g = costs.grid();
    let (ix, iy) = match g.world_to_cell(pose.x, pose.y) {
        Some((ix, iy)) if costs.cost(ix, iy).is_finite() => (ix, iy),
        _ => g.nearest_free(pose.x, pose.y).ok_or(Error::BlockedPose { x: pose.x, y: pose.y })?,
    };
    Ok(g.index(ix, iy))
}

/// Drop the start cell centre so replanning never drags the robot backwards.
fn follower_for(path: &GridPath) -> PathFollower {
    let skip = usize::from(path.points.len() > 1);
    PathFollower::new(path.points[skip..].to_vec())
}

struct Robot<'a> {
    cfg: &'a ScenarioConfig,
    static_costs: CostGrid,
    pose: Pose2D,
    follower: PathFollower,
}

impl Robot<'_> {
    fn replan(&mut self, kind: BehaviorKind, peds: &[Pedestrian]) -> Result<()> {
        let p = &self.cfg.params;
        // Only pedestrians the robot can perceive enter the social layer.
        let poses: Vec<Pose2D> = peds
            .iter()
            .map(Pedestrian::pose)
            .filter(|q| q.distance(&self.pose) <= PUBLIC_SPACE_RADIUS)
            .collect();
        let costs = self.static_costs.with_pedestrians(&poses, &p.social);
        let path = match kind {
            BehaviorKind::NavStack => {
                let from = cell_index(&costs, &self.pose)?;
                let to = cell_index(&costs, &self.cfg.goal)?;
                plan_cells(&costs, from, to)?
            }
            BehaviorKind::WrongWay => {
                let (cx, cy) = costs.grid().coords(cell_index(&costs, &self.pose)?);
                let mut here = self.pose;
                if costs.grid().world_to_cell(here.x, here.y) != Some((cx, cy)) {
                    (here.x, here.y) = costs.grid().cell_center(cx, cy);
                }
                plan_wrong_way(&costs, &here, &self.cfg.goal, p.kinematics.wrong_way_radius)?
            }
            BehaviorKind::Spinning => return Ok(()),
        };
        self.follower = follower_for(&path);
        Ok(())
    }
}

/// Run one episode. The same `(config, seed)` always yields bit-identical
/// results.
pub fn run_episode(config: &ScenarioConfig, seed: u64) -> Result<EpisodeResult> {
    config.validate()?;
    let p = &config.params;
    let kin = &p.kinematics;
    let dt = 1.0 / FRAME_RATE_HZ;
    let max_ticks = (p.max_duration * FRAME_RATE_HZ).round() as u64;
    let replan_ticks = ((p.replan_interval * FRAME_RATE_HZ).round() as u64).max(1);

    let mut behavior_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::BEHAVIOR]));
    let mut user_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::USER]));
    let mut impression_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::IMPRESSION]));

    let routes = match &config.routes {
        Some(r) => r.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::PEDESTRIANS]));
            random_routes(&config.map, p.pedestrian_count, &mut rng)
        }
    };
    let mut peds: Vec<Pedestrian> = routes.into_iter().map(Pedestrian::new).collect();

    let static_costs = CostGrid::base(Arc::clone(&config.map), &p.social);
    let mut robot = Robot { cfg: config, static_costs, pose: config.start, follower: PathFollower::default() };
    let mut user = UserFollower::new(config.start);
    let mut trail = Trail::new((config.start.x, config.start.y));

    let mut kind = BehaviorKind::NavStack;
    let mut started = 0u64;
    let mut ends = kind.duration_ticks(FRAME_RATE_HZ);
    robot.replan(kind, &peds)?;

    let mut behaviors = Vec::new();
    let mut pauses = Vec::new();
    let mut samples = Vec::new();
    let mut window: VecDeque<FrameObservation> = VecDeque::with_capacity(WINDOW_FRAMES + 1);
    let mut history: VecDeque<BehaviorKind> = VecDeque::with_capacity(WINDOW_FRAMES + 1);
    let mut pending_after: Option<u64> = None;
    let mut max_user_distance = 0.0f64;
    let mut user_always_free = true;

    let record = |tick: u64,
                  robot: &Pose2D,
                  user: &Pose2D,
                  peds: &[Pedestrian],
                  history: &VecDeque<BehaviorKind>,
                  rng: &mut ChaCha8Rng|
     -> Result<FrameObservation> {
        let gaze = gaze_toward(user, robot, p.user.gaze_noise, rng);
        let d = if history.is_empty() {
            0.0
        } else {
            let h: Vec<BehaviorKind> = history.iter().copied().collect();
            p.impression.dissatisfaction(&BehaviorMix::from_ticks(&h)?)
        };
        let blend = blend_response(d, config.traits.expressiveness, p.user.expressiveness_noise, rng);
        Ok(FrameObservation {
            t: tick_time(tick),
            robot: quantize_pose(robot),
            user: quantize_pose(user),
            gaze,
            blend,
            pedestrians: peds.iter().map(|q| quantize_pose(&q.pose())).collect(),
            goal: config.goal,
        })
    };

    window.push_back(record(0, &robot.pose, &user.pose, &peds, &history, &mut user_rng)?);
    let mut tick = 0u64;
    let end = loop {
        if tick >= max_ticks {
            break EpisodeEnd::DurationCap;
        }
        tick += 1;
        for q in peds.iter_mut() {
            q.step(kin.pedestrian_speed, dt);
        }
        if kind == BehaviorKind::NavStack && tick > started + 1 && (tick - started - 1) % replan_ticks == 0 {
            robot.replan(kind, &peds)?;
        }
        robot.pose = step_robot(&robot.pose, kind, &mut robot.follower, dt, kin);
        trail.push((robot.pose.x, robot.pose.y));
        user.step(&robot.pose, &trail, kin.user_speed, kin.follow_distance, dt);
        max_user_distance = max_user_distance.max(user.pose.distance(&robot.pose));
        user_always_free &= config.map.is_free_at(user.pose.x, user.pose.y);

        history.push_back(kind);
        if history.len() > WINDOW_FRAMES {
            history.pop_front();
        }
        window.push_back(record(tick, &robot.pose, &user.pose, &peds, &history, &mut user_rng)?);
        if window.len() > WINDOW_FRAMES {
            window.pop_front();
        }

        let phase = if pending_after == Some(tick) {
            pending_after = None;
            Some(Phase::After)
        } else if ends >= BEFORE_OFFSET_TICKS && tick == ends - BEFORE_OFFSET_TICKS {
            Some(Phase::Before)
        } else {
            None
        };
        if let Some(phase) = phase {
            if window.len() == WINDOW_FRAMES {
                let h: Vec<BehaviorKind> = history.iter().copied().collect();
                let mix = BehaviorMix::from_ticks(&h)?;
                let labels = p.impression.sample_impression(&mix, &config.traits, &mut impression_rng);
                pauses.push(PauseEvent { t: tick_time(tick), tick, phase, behavior_at_pause: kind });
                samples.push(Sample {
                    sample_id: format!("{}-t{}-q{:02}", config.participant_id, config.task_id, samples.len()),
                    participant_id: config.participant_id.clone(),
                    task_id: config.task_id,
                    phase,
                    frames: window.iter().cloned().collect(),
                    labels,
                });
                if config.query_budget.is_some_and(|b| samples.len() >= b) {
                    break EpisodeEnd::QueryBudget;
                }
            }
        }

        if kind == BehaviorKind::NavStack && robot.pose.distance(&config.goal) <= kin.goal_tolerance {
            break EpisodeEnd::GoalReached;
        }

        if tick == ends {
            behaviors.push(BehaviorInterval { kind, start_tick: started, end_tick: tick, truncated: false });
            kind = next_behavior(kind, &mut behavior_rng);
            started = tick;
            ends = tick + kind.duration_ticks(FRAME_RATE_HZ);
            pending_after = Some(tick + AFTER_OFFSET_TICKS);
            robot.replan(kind, &peds)?;
        }
    };
    if tick > started {
        behaviors.push(BehaviorInterval { kind, start_tick: started, end_tick: tick, truncated: true });
    }

    Ok(EpisodeResult { samples, pauses, behaviors, end, ticks: tick, max_user_distance, user_always_free })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::warehouse::{default_warehouse, tasks_for};
    use std::sync::OnceLock;

    fn warehouse() -> Arc<OccupancyGrid> {
        static MAP: OnceLock<Arc<OccupancyGrid>> = OnceLock::new();
        MAP.get_or_init(|| Arc::new(default_warehouse())).clone()
    }

    fn scenario(task: usize) -> ScenarioConfig {
        let map = warehouse();
        let t = tasks_for(&map).unwrap()[task];
        ScenarioConfig::new(map, t.start, t.goal)
    }

    #[test]
    fn pauses_follow_switch_schedule() {
        let r = run_episode(&scenario(0), 11).unwrap();
        assert_eq!(r.end, EpisodeEnd::DurationCap);
        let switches: Vec<u64> = r.behaviors.iter().filter(|b| !b.truncated).map(|b| b.end_tick).collect();
        for p in &r.pauses {
            match p.phase {
                Phase::Before => assert!(switches.contains(&(p.tick + BEFORE_OFFSET_TICKS))),
                Phase::After => assert!(switches.contains(&(p.tick - AFTER_OFFSET_TICKS))),
            }
        }
        for s in &switches {
            let before = r.pauses.iter().any(|p| p.phase == Phase::Before && p.tick + 20 == *s);
            assert!(before, "no Before pause for switch at {s}");
            if s + 40 <= r.ticks {
                assert!(r.pauses.iter().any(|p| p.phase == Phase::After && p.tick == s + 40));
            }
        }
        assert_eq!(r.samples.len(), r.pauses.len());
    }

    #[test]
    fn behavior_durations_and_adjacency() {
        for seed in 0..4 {
            let r = run_episode(&scenario(seed as usize % 4), seed).unwrap();
            assert_eq!(r.behaviors[0].kind, BehaviorKind::NavStack);
            for b in r.behaviors.iter().filter(|b| !b.truncated) {
                assert_eq!(b.duration(), b.kind.duration());
            }
            for pair in r.behaviors.windows(2) {
                assert_eq!(pair[0].end_tick, pair[1].start_tick);
                assert!(pair[0].kind == BehaviorKind::NavStack || pair[1].kind == BehaviorKind::NavStack);
                assert_ne!(pair[0].kind, pair[1].kind);
            }
        }
    }

    #[test]
    fn before_windows_stay_in_one_interval() {
        let r = run_episode(&scenario(1), 5).unwrap();
        for (s, p) in r.samples.iter().zip(&r.pauses) {
            s.validate().unwrap();
            assert_eq!(s.phase, p.phase);
            let first = (s.frames[0].t * FRAME_RATE_HZ).round() as u64;
            let last = (s.last_frame().t * FRAME_RATE_HZ).round() as u64;
            assert_eq!(last, p.tick);
            if p.phase == Phase::Before {
                // Frame k reflects the step from k-1, so the window covers steps first..=last.
                let b = r.behaviors.iter().find(|b| b.start_tick < first && last <= b.end_tick);
                assert!(b.is_some(), "window {first}..={last} spans a switch");
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = ScenarioConfig { query_budget: Some(4), ..scenario(2) };
        let a = run_episode(&cfg, 99).unwrap();
        let b = run_episode(&cfg, 99).unwrap();
        assert_eq!(serde_json::to_string(&a.samples).unwrap(), serde_json::to_string(&b.samples).unwrap());
        let c = run_episode(&cfg, 100).unwrap();
        assert_ne!(serde_json::to_string(&a.samples).unwrap(), serde_json::to_string(&c.samples).unwrap());
    }

    #[test]
    fn user_stays_close_and_on_free_cells() {
        for task in 0..4 {
            let r = run_episode(&scenario(task), task as u64).unwrap();
            assert!(r.user_always_free);
            assert!(r.max_user_distance <= 10.0, "{}", r.max_user_distance);
        }
    }

    #[test]
    fn budget_stops_episode() {
        let cfg = ScenarioConfig { query_budget: Some(3), ..scenario(0) };
        let r = run_episode(&cfg, 1).unwrap();
        assert_eq!(r.end, EpisodeEnd::QueryBudget);
        assert_eq!(r.samples.len(), 3);
        assert_eq!(r.samples[2].sample_id, "p0-t0-q02");
    }

    #[test]
    fn blocked_start_is_rejected() {
        let mut cfg = scenario(0);
        cfg.start = Pose2D::new(0.05, 0.05, 0.0);
        assert!(matches!(run_episode(&cfg, 0), Err(Error::BlockedPose { .. })));
    }

    #[test]
    fn reaches_goal_on_short_task() {
        let map = warehouse();
        let (sx, sy) = map.cell_center(100, 60);
        let (gx, gy) = map.cell_center(140, 60);
        let mut cfg = ScenarioConfig::new(map, Pose2D::new(sx, sy, 0.0), Pose2D::new(gx, gy, 0.0));
        cfg.params.pedestrian_count = 0;
        let r = run_episode(&cfg, 0).unwrap();
        assert_eq!(r.end, EpisodeEnd::GoalReached);
        assert!(r.ticks < 50);
    }
}
