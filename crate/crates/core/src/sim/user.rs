//! Synthetic robot user: follows the robot and emits gaze and facial
//! responses driven by a latent dissatisfaction level.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap, Pose2D};
use crate::observation::{BlendShapeVector, GazeVec, BLEND_SHAPES};

/// Blend-shape indices that respond to dissatisfaction.
pub const NEGATIVE_AFFECT_INDICES: [usize; 5] = [2, 9, 17, 31, 44];
pub const BLEND_BASELINE: f64 = 0.05;
pub const BLEND_AMPLITUDE: f64 = 0.9;
/// One unit of `expressiveness_noise` is this much activation std.
pub const BLEND_NOISE_UNIT: f64 = 0.2;
const BLEND_QUANTUM: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserModelConfig {
    /// Angular spread of gaze noise, radians.
    pub gaze_noise: f64,
    /// Per-frame facial noise level, in units of [`BLEND_NOISE_UNIT`].
    pub expressiveness_noise: f64,
}

impl Default for UserModelConfig {
    fn default() -> Self {
        UserModelConfig { gaze_noise: 0.1, expressiveness_noise: 0.5 }
    }
}

/// Polyline of past robot positions with cumulative arc length.
#[derive(Debug, Clone)]
pub struct Trail {
    points: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl Trail {
    pub fn new(start: (f64, f64)) -> Self {
        Trail { points: vec![start], cumulative: vec![0.0] }
    }

    pub fn push(&mut self, p: (f64, f64)) {
        let last = *self.points.last().expect("trail is never empty");
        let d = (p.0 - last.0).hypot(p.1 - last.1);
        if d > 1e-9 {
            let total = self.length() + d;
            self.points.push(p);
            self.cumulative.push(total);
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("trail is never empty")
    }

    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, self.length());
        let k = self.cumulative.partition_point(|&c| c < s);
        if k == 0 {
            return self.points[0];
        }
        let (a, b) = (self.points[k - 1], self.points[k]);
        let span = self.cumulative[k] - self.cumulative[k - 1];
        let t = if span > 0.0 { (s - self.cumulative[k - 1]) / span } else { 1.0 };
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }
}

/// User position as progress along the robot's trail, so that every
/// position the user visits was first visited by the robot.
#[derive(Debug, Clone)]
pub struct UserFollower {
    pub pose: Pose2D,
    progress: f64,
}

impl UserFollower {
    pub fn new(pose: Pose2D) -> Self {
        UserFollower { pose, progress: 0.0 }
    }

    /// Walk toward the trail point `follow_distance` behind the robot at no
    /// more than `speed`.
    pub fn step(&mut self, robot: &Pose2D, trail: &Trail, speed: f64, follow_distance: f64, dt: f64) -> Pose2D {
        let target = (trail.length() - follow_distance).max(0.0);
        let before = (self.pose.x, self.pose.y);
        if target > self.progress {
            self.progress = (self.progress + speed * dt).min(target);
        }
        let (x, y) = trail.point_at(self.progress);
        let (dx, dy) = (x - before.0, y - before.1);
        let theta = if dx.hypot(dy) > 1e-9 {
            dy.atan2(dx)
        } else if (robot.x - x).hypot(robot.y - y) > 1e-9 {
            (robot.y - y).atan2(robot.x - x)
        } else {
            self.pose.theta
        };
        self.pose = Pose2D::new(x, y, wrap(theta));
        self.pose
    }
}

/// Unit gaze toward the robot in the user's head frame, perturbed by
/// Gaussian angular noise in azimuth and elevation.
pub fn gaze_toward<R: Rng + ?Sized>(user: &Pose2D, robot: &Pose2D, noise: f64, rng: &mut R) -> GazeVec {
    let (dx, dy) = (robot.x - user.x, robot.y - user.y);
    let bearing = if dx.hypot(dy) > 1e-9 { dy.atan2(dx) - user.theta } else { 0.0 };
    let (mut az, mut el) = (bearing, 0.0);
    if noise > 0.0 {
        let n = Normal::new(0.0, noise).expect("finite noise");
        az += n.sample(rng);
        el += n.sample(rng);
    }
    GazeVec::from_direction(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()).expect("unit direction")
}

/// Baseline activation everywhere, plus an expressiveness-scaled response on
/// the negative-affect indices and per-channel noise; clipped to `[0, 1]`.
pub fn blend_response<R: Rng + ?Sized>(
    dissatisfaction: f64,
    expressiveness: f64,
    noise_level: f64,
    rng: &mut R,
) -> BlendShapeVector {
    let mut v = vec![BLEND_BASELINE; BLEND_SHAPES];
    let response = expressiveness * BLEND_AMPLITUDE * dissatisfaction;
    for &i in &NEGATIVE_AFFECT_INDICES {
        v[i] += response;
    }
    if noise_level > 0.0 {
        let n = Normal::new(0.0, noise_level * BLEND_NOISE_UNIT).expect("finite noise");
        for x in v.iter_mut() {
            *x += n.sample(rng);
        }
    }
    for x in v.iter_mut() {
        *x = ((x.clamp(0.0, 1.0) / BLEND_QUANTUM).round() * BLEND_QUANTUM).clamp(0.0, 1.0);
    }
    BlendShapeVector::new(v).expect("clipped activations")
}
