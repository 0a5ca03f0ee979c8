//! Planar poses and robot-frame transforms.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of the robot's public space. Agents farther than this are dropped
/// from the spatial features.
pub const PUBLIC_SPACE_RADIUS: f64 = 7.2;

/// Angles this close to the branch cut are snapped to `+PI`.
const BRANCH_CUT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for Pose2D {
    fn from([x, y, theta]: [f64; 3]) -> Self {
        Pose2D { x, y, theta }
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.theta]
    }
}

impl Pose2D {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Wrap an angle into `(-PI, PI]`.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    if r <= -PI + BRANCH_CUT_EPS || r > PI - BRANCH_CUT_EPS {
        r = PI;
    }
    Ok(r)
}

/// Wrap a finite angle; used internally where finiteness is already known.
pub(crate) fn wrap(theta: f64) -> f64 {
    normalize_angle(theta).unwrap_or(theta)
}

/// Express `target` in the frame attached to `robot` (x-axis along the
/// robot heading).
pub fn to_robot_frame(target: &Pose2D, robot: &Pose2D) -> Result<Pose2D> {
    if !target.is_finite() || !robot.is_finite() {
        return Err(Error::NonFinite("pose"));
    }
    let (s, c) = robot.theta.sin_cos();
    let dx = target.x - robot.x;
    let dy = target.y - robot.y;
    Ok(Pose2D {
        x: c * dx + s * dy,
        y: -s * dx + c * dy,
        theta: normalize_angle(target.theta - robot.theta)?,
    })
}

/// Inverse of [`to_robot_frame`]: map a robot-frame pose back to the world.
pub fn from_robot_frame(local: &Pose2D, robot: &Pose2D) -> Result<Pose2D> {
    if !local.is_finite() || !robot.is_finite() {
        return Err(Error::NonFinite("pose"));
    }
    let (s, c) = robot.theta.sin_cos();
    Ok(Pose2D {
        x: robot.x + c * local.x - s * local.y,
        y: robot.y + s * local.x + c * local.y,
        theta: normalize_angle(local.theta + robot.theta)?,
    })
}

/// Keep the pedestrians within [`PUBLIC_SPACE_RADIUS`] of the robot
/// (boundary inclusive), transformed into the robot frame, in input order.
pub fn filter_public_space(pedestrians: &[Pose2D], robot: &Pose2D) -> Result<Vec<Pose2D>> {
    let mut out = Vec::with_capacity(pedestrians.len());
    for p in pedestrians {
        if p.distance(robot) <= PUBLIC_SPACE_RADIUS {
            out.push(to_robot_frame(p, robot)?);
        }
    }
    Ok(out)
}
