//! Seeded simulator of the guided-navigation study.

pub mod behavior;
pub mod costmap;
pub mod episode;
pub mod impression;
pub mod pedestrians;
pub mod planner;
pub mod robot;
pub mod session;
pub mod user;
pub mod warehouse;

pub use behavior::{next_behavior, BehaviorKind, BehaviorState};
pub use costmap::{build_social_costmap, CostGrid, SocialCostParams};
pub use episode::{run_episode, BehaviorInterval, EpisodeEnd, EpisodeResult, PauseEvent, ScenarioConfig, SimParams};
pub use impression::{sample_impression, BehaviorMix, ImpressionModel, ImpressionTraits, TraitDistribution};
pub use planner::{plan_path, GridPath};
pub use robot::{step_robot, Kinematics, PathFollower};
pub use session::{run_session, SessionConfig, SessionResult};
pub use warehouse::{default_warehouse, tasks_for, Task};
