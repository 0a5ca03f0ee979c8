//! Social cost layer over the static map.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;
use crate::grid::{Cell, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocialCostParams {
    pub base: f64,
    pub amplitude: f64,
    pub sigma: f64,
    /// Truncation radius in units of `sigma`.
    pub cutoff_sigmas: f64,
}

impl Default for SocialCostParams {
    fn default() -> Self {
        SocialCostParams { base: 1.0, amplitude: 50.0, sigma: 0.8, cutoff_sigmas: 3.0 }
    }
}

impl SocialCostParams {
    pub fn bump(&self, distance: f64) -> f64 {
        if distance > self.cutoff_sigmas * self.sigma {
            0.0
        } else {
            self.amplitude * (-(distance * distance) / (2.0 * self.sigma * self.sigma)).exp()
        }
    }
}

/// Per-cell traversal cost. Blocked cells hold `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct CostGrid {
    grid: Arc<OccupancyGrid>,
    costs: Vec<f64>,
    min_cost: f64,
}

impl CostGrid {
    pub fn from_costs(grid: impl Into<Arc<OccupancyGrid>>, costs: Vec<f64>) -> Self {
        let grid = grid.into();
        assert_eq!(costs.len(), grid.cells().len());
        let min_cost = costs.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
        CostGrid { grid, costs, min_cost: if min_cost.is_finite() { min_cost } else { 1.0 } }
    }

    /// Static layer: Occupied and Unknown cells are impassable, Free cells
    /// cost `base`.
    pub fn base(grid: Arc<OccupancyGrid>, params: &SocialCostParams) -> Self {
        let costs = grid.cells().iter().map(|c| if *c == Cell::Free { params.base } else { f64::INFINITY }).collect();
        Self::from_costs(grid, costs)
    }

    /// Copy of this layer with a truncated Gaussian bump added around each
    /// pedestrian. Bumps only raise costs, so the stored minimum remains a
    /// valid lower bound.
    pub fn with_pedestrians(&self, pedestrians: &[Pose2D], params: &SocialCostParams) -> Self {
        let grid = &self.grid;
        let mut costs = self.costs.clone();
        let res = grid.resolution();
        let reach = (params.cutoff_sigmas * params.sigma / res).ceil() as i64 + 1;
        for p in pedestrians {
            let Some((px, py)) = grid.world_to_cell(p.x, p.y).or_else(|| clamp_cell(grid, p)) else { continue };
            let (x0, x1) = ((px as i64 - reach).max(0), (px as i64 + reach).min(grid.width() as i64 - 1));
            let (y0, y1) = ((py as i64 - reach).max(0), (py as i64 + reach).min(grid.height() as i64 - 1));
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    let i = grid.index(ix as usize, iy as usize);
                    if !costs[i].is_finite() {
                        continue;
                    }
                    let (cx, cy) = grid.cell_center(ix as usize, iy as usize);
                    costs[i] += params.bump((cx - p.x).hypot(cy - p.y));
                }
            }
        }
        CostGrid { grid: Arc::clone(grid), costs, min_cost: self.min_cost }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost(&self, ix: usize, iy: usize) -> f64 {
        self.costs[self.grid.index(ix, iy)]
    }

    pub fn cost_at_index(&self, i: usize) -> f64 {
        self.costs[i]
    }

    /// Lower bound on the cost of any passable cell.
    pub fn min_cost(&self) -> f64 {
        self.min_cost
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }
}

/// Occupied and Unknown cells are impassable; Free cells cost `base` plus a
/// truncated Gaussian bump for each pedestrian.
pub fn build_social_costmap(grid: &OccupancyGrid, pedestrians: &[Pose2D], params: &SocialCostParams) -> CostGrid {
    CostGrid::base(Arc::new(grid.clone()), params).with_pedestrians(pedestrians, params)
}

// Pedestrians slightly off the map can still influence border cells.
fn clamp_cell(grid: &OccupancyGrid, p: &Pose2D) -> Option<(usize, usize)> {
    let o = grid.origin();
    if o.theta != 0.0 {
        return None;
    }
    let fx = ((p.x - o.x) / grid.resolution()).floor();
    let fy = ((p.y - o.y) / grid.resolution()).floor();
    let margin = 8.0 / grid.resolution();
    if fx < -margin || fy < -margin || fx > grid.width() as f64 + margin || fy > grid.height() as f64 + margin {
        return None;
    }
    Some((fx.clamp(0.0, (grid.width() - 1) as f64) as usize, fy.clamp(0.0, (grid.height() - 1) as f64) as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_grid() -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(60, 40, 0.15, Cell::Free).unwrap();
        g.set(3, 3, Cell::Occupied);
        g.set(4, 3, Cell::Unknown);
        g
    }

    #[test]
    fn no_pedestrians_is_base_cost() {
        let g = open_grid();
        let c = build_social_costmap(&g, &[], &SocialCostParams::default());
        for (cell, cost) in g.cells().iter().zip(c.costs()) {
            if *cell == Cell::Free {
                assert_eq!(*cost, 1.0);
            } else {
                assert!(cost.is_infinite());
            }
        }
    }

    #[test]
    fn pedestrian_on_cell_centre_peaks() {
        let g = open_grid();
        let (x, y) = g.cell_center(20, 20);
        let c = build_social_costmap(&g, &[Pose2D::new(x, y, 0.0)], &SocialCostParams::default());
        assert!((c.cost(20, 20) - 51.0).abs() < 1e-12);
    }

    #[test]
    fn two_pedestrians_match_direct_sum() {
        let g = open_grid();
        let params = SocialCostParams::default();
        let peds = [Pose2D::new(2.0, 2.1, 0.0), Pose2D::new(3.1, 2.6, 1.0)];
        let c = build_social_costmap(&g, &peds, &params);
        for iy in 0..g.height() {
            for ix in 0..g.width() {
                if g.get(ix, iy) != Cell::Free {
                    continue;
                }
                let cx = (ix as f64 + 0.5) * 0.15;
                let cy = (iy as f64 + 0.5) * 0.15;
                let mut expected = 1.0;
                for p in &peds {
                    let d = ((cx - p.x).powi(2) + (cy - p.y).powi(2)).sqrt();
                    if d <= 2.4 {
                        expected += 50.0 * (-d * d / (2.0 * 0.64)).exp();
                    }
                }
                assert!((c.cost(ix, iy) - expected).abs() < 1e-9, "({ix},{iy})");
            }
        }
    }
}
