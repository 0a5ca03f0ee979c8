//! Scripted pedestrians walking closed waypoint loops at constant speed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap, Pose2D};
use crate::grid::OccupancyGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianRoute {
    pub waypoints: Vec<(f64, f64)>,
    /// Initial position as arc length along the loop.
    pub phase: f64,
}

impl PedestrianRoute {
    fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.waypoints.len();
        (0..n).map(move |i| (self.waypoints[i], self.waypoints[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b.0 - a.0).hypot(b.1 - a.1)).sum()
    }

    /// Pose at arc length `s` (wrapped around the loop).
    pub fn pose_at(&self, s: f64) -> Pose2D {
        let total = self.length();
        if self.waypoints.len() < 2 || total <= 0.0 {
            let (x, y) = self.waypoints.first().copied().unwrap_or((0.0, 0.0));
            return Pose2D::new(x, y, 0.0);
        }
        let mut s = s.rem_euclid(total);
        for (a, b) in self.segments() {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if s <= len && len > 0.0 {
                let t = s / len;
                return Pose2D::new(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), wrap((b.1 - a.1).atan2(b.0 - a.0)));
            }
            s -= len;
        }
        let (x, y) = self.waypoints[0];
        Pose2D::new(x, y, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Pedestrian {
    route: PedestrianRoute,
    travelled: f64,
}

impl Pedestrian {
    pub fn new(route: PedestrianRoute) -> Self {
        let travelled = route.phase;
        Pedestrian { route, travelled }
    }

    pub fn pose(&self) -> Pose2D {
        self.route.pose_at(self.travelled)
    }

    pub fn step(&mut self, speed: f64, dt: f64) {
        self.travelled += speed * dt;
    }
}

/// Random loops whose segments stay on Free cells.
pub fn random_routes<R: Rng + ?Sized>(grid: &OccupancyGrid, count: usize, rng: &mut R) -> Vec<PedestrianRoute> {
    let free: Vec<usize> = grid
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == crate::grid::Cell::Free)
        .map(|(i, _)| i)
        .collect();
    if free.is_empty() {
        return Vec::new();
    }
    let pick = |rng: &mut R| {
        let (x, y) = grid.coords(free[rng.random_range(0..free.len())]);
        grid.cell_center(x, y)
    };
    let mut routes = Vec::with_capacity(count);
    for _ in 0..count {
        let first = pick(rng);
        let mut waypoints = vec![first];
        for _ in 0..200 {
            let candidate = pick(rng);
            let last = *waypoints.last().expect("non-empty");
            let len = (candidate.0 - last.0).hypot(candidate.1 - last.1);
            if !(4.0..=30.0).contains(&len) || !grid.segment_is_free(last, candidate) {
                continue;
            }
            if waypoints.len() == 2 && !grid.segment_is_free(candidate, first) {
                continue;
            }
            waypoints.push(candidate);
            if waypoints.len() == 3 || (waypoints.len() == 2 && rng.random_bool(0.5)) {
                break;
            }
        }
        let mut route = PedestrianRoute { waypoints, phase: 0.0 };
        route.phase = rng.random::<f64>() * route.length();
        routes.push(route);
    }
    routes
}
