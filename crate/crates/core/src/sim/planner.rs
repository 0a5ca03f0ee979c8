//! Eight-connected A* over a [`CostGrid`].
//!
//! Entering a cell costs that cell's traversal cost, times `sqrt(2)` for
//! diagonal steps. Diagonal steps may not cut the corner of an impassable
//! cell. The heuristic is the octile distance scaled by a lower bound on the
//! cell cost, which keeps it admissible and consistent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::sim::costmap::CostGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    /// Cell indices from start to goal, inclusive.
    pub cells: Vec<usize>,
    /// World coordinates of the cell centres.
    pub points: Vec<(f64, f64)>,
    pub cost: f64,
}

#[derive(Clone, Copy)]
struct Entry {
    f: f64,
    h: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Min-heap on (f bucket, h, index). Bucketing absorbs rounding noise
    // between equivalent paths so that the h tie-break can take effect.
    fn cmp(&self, other: &Self) -> Ordering {
        bucket(other.f)
            .cmp(&bucket(self.f))
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Width of the f-ordering buckets.
const F_RESOLUTION: f64 = 1e-9;

fn bucket(f: f64) -> i64 {
    (f / F_RESOLUTION).floor() as i64
}

const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Neighbours of `index` reachable in one move, with their step cost.
/// Shared by every search over the cost grid so they agree on the graph.
pub fn neighbors(costs: &CostGrid, index: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    moves(costs, index).map(|(n, step, _)| (n, step))
}

fn moves(costs: &CostGrid, index: usize) -> impl Iterator<Item = (usize, f64, bool)> + '_ {
    let w = costs.width() as i64;
    let h = costs.height() as i64;
    let (x, y) = ((index as i64) % w, (index as i64) / w);
    NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        if nx < 0 || ny < 0 || nx >= w || ny >= h {
            return None;
        }
        let n = (ny * w + nx) as usize;
        let c = costs.cost_at_index(n);
        if !c.is_finite() {
            return None;
        }
        if dx != 0 && dy != 0 {
            let side_a = costs.cost_at_index((y * w + nx) as usize);
            let side_b = costs.cost_at_index((ny * w + x) as usize);
            if !side_a.is_finite() || !side_b.is_finite() {
                return None;
            }
            Some((n, c * SQRT_2, true))
        } else {
            Some((n, c, false))
        }
    })
}

/// Cost of a cell sequence, summed in ascending order of step cost so that
/// paths with the same multiset of steps get bit-identical totals.
pub fn path_cost(costs: &CostGrid, cells: &[usize]) -> f64 {
    let w = costs.width();
    let mut steps: Vec<f64> = cells
        .windows(2)
        .map(|p| {
            let diagonal = p[0] % w != p[1] % w && p[0] / w != p[1] / w;
            let c = costs.cost_at_index(p[1]);
            if diagonal {
                c * SQRT_2
            } else {
                c
            }
        })
        .collect();
    steps.sort_by(f64::total_cmp);
    steps.iter().sum()
}

fn octile(costs: &CostGrid, a: usize, b: usize) -> f64 {
    let w = costs.width();
    let dx = (a % w).abs_diff(b % w) as f64;
    let dy = (a / w).abs_diff(b / w) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    costs.min_cost() * (hi - lo + SQRT_2 * lo)
}

fn cell_of(costs: &CostGrid, pose: &Pose2D) -> Result<usize> {
    let (ix, iy) = costs
        .grid()
        .world_to_cell(pose.x, pose.y)
        .ok_or(Error::BlockedPose { x: pose.x, y: pose.y })?;
    if !costs.cost(ix, iy).is_finite() {
        return Err(Error::BlockedPose { x: pose.x, y: pose.y });
    }
    Ok(costs.grid().index(ix, iy))
}

/// Cheapest 8-connected path between the cells under `start` and `goal`.
pub fn plan_path(costs: &CostGrid, start: &Pose2D, goal: &Pose2D) -> Result<GridPath> {
    let s = cell_of(costs, start)?;
    let g = cell_of(costs, goal)?;
    plan_cells(costs, s, g)
}

pub fn plan_cells(costs: &CostGrid, start: usize, goal: usize) -> Result<GridPath> {
    let n = costs.costs().len();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    best[start] = 0.0;
    let h0 = octile(costs, start, goal);
    open.push(Entry { f: h0, h: h0, index: start });
    while let Some(Entry { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal {
            break;
        }
        let g_here = best[index];
        for (next, step) in neighbors(costs, index) {
            if closed[next] {
                continue;
            }
            let candidate = g_here + step;
            if candidate < best[next] || (candidate == best[next] && index < parent[next]) {
                best[next] = candidate;
                parent[next] = index;
                let h = octile(costs, next, goal);
                open.push(Entry { f: candidate + h, h, index: next });
            }
        }
    }
    if !closed[goal] {
        let w = costs.width();
        return Err(Error::NoPath { start: (start % w, start / w), goal: (goal % w, goal / w) });
    }
    let mut cells = vec![goal];
    while let Some(&last) = cells.last() {
        if last == start {
            break;
        }
        cells.push(parent[last]);
    }
    cells.reverse();
    let grid = costs.grid();
    let points = cells
        .iter()
        .map(|&i| {
            let (x, y) = grid.coords(i);
            grid.cell_center(x, y)
        })
        .collect();
    let cost = path_cost(costs, &cells);
    Ok(GridPath { cells, points, cost })
}

/// Cells reachable from `start` within `max_distance` meters of travel over
/// passable cells, with their travel distance. Sorted by cell index.
pub fn reachable_within(costs: &CostGrid, start: usize, max_distance: f64) -> Vec<(usize, f64)> {
    let res = costs.grid().resolution();
    let n = costs.costs().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut open = BinaryHeap::new();
    dist[start] = 0.0;
    open.push(Entry { f: 0.0, h: 0.0, index: start });
    let mut out = Vec::new();
    while let Some(Entry { f, index, .. }) = open.pop() {
        if f > dist[index] {
            continue;
        }
        out.push((index, f));
        for (next, _, diagonal) in moves(costs, index) {
            let d = f + if diagonal { SQRT_2 * res } else { res };
            if d <= max_distance && d < dist[next] {
                dist[next] = d;
                open.push(Entry { f: d, h: 0.0, index: next });
            }
        }
    }
    out.sort_by_key(|(i, _)| *i);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, OccupancyGrid};
    use crate::sim::costmap::{build_social_costmap, SocialCostParams};

    fn costs_for(g: &OccupancyGrid) -> CostGrid {
        build_social_costmap(g, &[], &SocialCostParams::default())
    }

    #[test]
    fn start_equals_goal() {
        let g = OccupancyGrid::filled(5, 5, 1.0, Cell::Free).unwrap();
        let p = plan_path(&costs_for(&g), &Pose2D::new(2.5, 2.5, 0.0), &Pose2D::new(2.2, 2.9, 0.0)).unwrap();
        assert_eq!(p.cells.len(), 1);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn corner_to_corner_is_octile() {
        let g = OccupancyGrid::filled(5, 5, 1.0, Cell::Free).unwrap();
        let p = plan_path(&costs_for(&g), &Pose2D::new(0.5, 0.5, 0.0), &Pose2D::new(4.5, 4.5, 0.0)).unwrap();
        assert_eq!(p.cost, 4.0 * SQRT_2);
        assert_eq!(p.cells.len(), 5);
        let p = plan_path(&costs_for(&g), &Pose2D::new(0.5, 0.5, 0.0), &Pose2D::new(4.5, 1.5, 0.0)).unwrap();
        assert_eq!(p.cost, 3.0 + SQRT_2);
    }

    #[test]
    fn unreachable_goal() {
        let mut g = OccupancyGrid::filled(5, 5, 1.0, Cell::Free).unwrap();
        for y in 0..5 {
            g.set(2, y, Cell::Occupied);
        }
        let err = plan_path(&costs_for(&g), &Pose2D::new(0.5, 0.5, 0.0), &Pose2D::new(4.5, 4.5, 0.0));
        assert!(matches!(err, Err(Error::NoPath { .. })));
        let err = plan_path(&costs_for(&g), &Pose2D::new(2.5, 0.5, 0.0), &Pose2D::new(4.5, 4.5, 0.0));
        assert!(matches!(err, Err(Error::BlockedPose { .. })));
    }

    #[test]
    fn diagonal_moves_do_not_cut_corners() {
        let mut g = OccupancyGrid::filled(2, 2, 1.0, Cell::Free).unwrap();
        g.set(1, 0, Cell::Occupied);
        let p = plan_path(&costs_for(&g), &Pose2D::new(0.5, 0.5, 0.0), &Pose2D::new(1.5, 1.5, 0.0)).unwrap();
        assert_eq!(p.cells, vec![0, 2, 3]);
    }

    #[test]
    fn reachable_cells_respect_radius() {
        let g = OccupancyGrid::filled(30, 30, 0.5, Cell::Free).unwrap();
        let c = costs_for(&g);
        let start = g.index(15, 15);
        let cells = reachable_within(&c, start, 2.0);
        assert!(cells.iter().all(|(_, d)| *d <= 2.0));
        assert!(cells.iter().any(|(i, _)| *i == g.index(19, 15)));
        assert!(!cells.iter().any(|(i, _)| *i == g.index(20, 15)));
    }
}
