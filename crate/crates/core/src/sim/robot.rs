//! Robot kinematics for the three scripted behaviors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap, Pose2D};
use crate::sim::behavior::BehaviorKind;
use crate::sim::costmap::CostGrid;
use crate::sim::planner::{plan_cells, reachable_within, GridPath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub robot_speed: f64,
    pub spin_rate: f64,
    pub user_speed: f64,
    pub follow_distance: f64,
    pub pedestrian_speed: f64,
    pub wrong_way_radius: f64,
    pub goal_tolerance: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Kinematics {
            robot_speed: 0.8,
            spin_rate: 1.0,
            user_speed: 1.2,
            follow_distance: 1.5,
            pedestrian_speed: 1.0,
            wrong_way_radius: 10.0,
            goal_tolerance: 0.3,
        }
    }
}

/// Walks a polyline at whatever distance budget it is given.
#[derive(Debug, Clone, Default)]
pub struct PathFollower {
    points: Vec<(f64, f64)>,
    next: usize,
}

impl PathFollower {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        PathFollower { points, next: 0 }
    }

    pub fn from_path(path: &GridPath) -> Self {
        Self::new(path.points.clone())
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.points.len()
    }

    pub fn end(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }

    /// Move up to `distance` along the remaining polyline. Heading follows
    /// the direction of the last movement; a finished path leaves the pose
    /// unchanged.
    pub fn advance(&mut self, pose: &Pose2D, mut distance: f64) -> Pose2D {
        let mut out = *pose;
        while distance > 0.0 && self.next < self.points.len() {
            let (tx, ty) = self.points[self.next];
            let (dx, dy) = (tx - out.x, ty - out.y);
            let d = dx.hypot(dy);
            if d > 1e-12 {
                out.theta = wrap(dy.atan2(dx));
            }
            if d <= distance {
                out.x = tx;
                out.y = ty;
                distance -= d;
                self.next += 1;
            } else {
                out.x += dx / d * distance;
                out.y += dy / d * distance;
                distance = 0.0;
            }
        }
        out
    }
}

/// One kinematic update. NavStack and WrongWay advance along their planned
/// path at the robot speed; Spinning turns in place.
pub fn step_robot(pose: &Pose2D, behavior: BehaviorKind, path: &mut PathFollower, dt: f64, kin: &Kinematics) -> Pose2D {
    debug_assert!(dt > 0.0);
    match behavior {
        BehaviorKind::Spinning => Pose2D { theta: wrap(pose.theta + kin.spin_rate * dt), ..*pose },
        BehaviorKind::NavStack | BehaviorKind::WrongWay => path.advance(pose, kin.robot_speed * dt),
    }
}

/// The passable cell within `radius` meters of travel that lies farthest
/// (straight-line) from the goal; ties go to the lower cell index.
pub fn wrong_way_target(costs: &CostGrid, robot: &Pose2D, goal: &Pose2D, radius: f64) -> Result<usize> {
    let grid = costs.grid();
    let (ix, iy) = grid.world_to_cell(robot.x, robot.y).ok_or(Error::BlockedPose { x: robot.x, y: robot.y })?;
    let start = grid.index(ix, iy);
    if !costs.cost_at_index(start).is_finite() {
        return Err(Error::BlockedPose { x: robot.x, y: robot.y });
    }
    let mut best = (start, f64::NEG_INFINITY);
    for (cell, _) in reachable_within(costs, start, radius) {
        let (cx, cy) = grid.coords(cell);
        let (wx, wy) = grid.cell_center(cx, cy);
        let d = (wx - goal.x).hypot(wy - goal.y);
        if d > best.1 {
            best = (cell, d);
        }
    }
    Ok(best.0)
}

/// Plan the wrong-way excursion from the robot's cell.
pub fn plan_wrong_way(costs: &CostGrid, robot: &Pose2D, goal: &Pose2D, radius: f64) -> Result<GridPath> {
    let target = wrong_way_target(costs, robot, goal, radius)?;
    let grid = costs.grid();
    let (ix, iy) = grid.world_to_cell(robot.x, robot.y).ok_or(Error::BlockedPose { x: robot.x, y: robot.y })?;
    plan_cells(costs, grid.index(ix, iy), target)
}
