//! The default warehouse layout and its four navigation tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::grid::{Cell, OccupancyGrid};

pub const WAREHOUSE_WIDTH: usize = 1000;
pub const WAREHOUSE_HEIGHT: usize = 160;
pub const WAREHOUSE_RESOLUTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub start: Pose2D,
    pub goal: Pose2D,
}

/// Task endpoints as fractions of the map extent.
pub const TASK_ENDPOINTS: [((f64, f64), (f64, f64)); 4] = [
    ((0.02, 0.35), (0.98, 0.65)),
    ((0.98, 0.65), (0.02, 0.35)),
    ((0.02, 0.65), (0.98, 0.35)),
    ((0.98, 0.35), (0.02, 0.65)),
];

fn fill_rect(g: &mut OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64, cell: Cell) {
    let r = g.resolution();
    let cx0 = (x0 / r).floor().max(0.0) as usize;
    let cy0 = (y0 / r).floor().max(0.0) as usize;
    let cx1 = ((x1 / r).ceil() as usize).min(g.width());
    let cy1 = ((y1 / r).ceil() as usize).min(g.height());
    for iy in cy0..cy1 {
        for ix in cx0..cx1 {
            g.set(ix, iy, cell);
        }
    }
}

/// A 150 m x 24 m hall: perimeter wall, shelving along both long walls with
/// unmapped space behind it, and two sparse rows of pallets.
pub fn default_warehouse() -> OccupancyGrid {
    let mut g = OccupancyGrid::filled(WAREHOUSE_WIDTH, WAREHOUSE_HEIGHT, WAREHOUSE_RESOLUTION, Cell::Free)
        .expect("static dimensions are valid");
    let w = WAREHOUSE_WIDTH as f64 * WAREHOUSE_RESOLUTION;
    let h = WAREHOUSE_HEIGHT as f64 * WAREHOUSE_RESOLUTION;
    let mut x = 6.0;
    while x + 9.0 < w - 6.0 {
        for (y0, y1) in [(0.9, 2.1), (h - 2.1, h - 0.9)] {
            fill_rect(&mut g, x, y0, x + 9.0, y1, Cell::Occupied);
        }
        fill_rect(&mut g, x + 0.3, 0.3, x + 8.7, 0.9, Cell::Unknown);
        fill_rect(&mut g, x + 0.3, h - 0.9, x + 8.7, h - 0.3, Cell::Unknown);
        x += 10.5;
    }
    let mut x = 12.0;
    let mut row = 0;
    while x + 1.2 < w - 12.0 {
        let (y0, y1) = if row % 2 == 0 { (6.0, 7.2) } else { (16.8, 18.0) };
        fill_rect(&mut g, x, y0, x + 1.2, y1, Cell::Occupied);
        x += 7.5;
        row += 1;
    }
    for ix in 0..g.width() {
        g.set(ix, 0, Cell::Occupied);
        g.set(ix, g.height() - 1, Cell::Occupied);
    }
    for iy in 0..g.height() {
        g.set(0, iy, Cell::Occupied);
        g.set(g.width() - 1, iy, Cell::Occupied);
    }
    g
}

fn snap(grid: &OccupancyGrid, fx: f64, fy: f64) -> Result<(f64, f64)> {
    let o = grid.origin();
    let x = o.x + fx * grid.width() as f64 * grid.resolution();
    let y = o.y + fy * grid.height() as f64 * grid.resolution();
    let (ix, iy) = grid.nearest_free(x, y).ok_or_else(|| Error::Config("map has no free cell".into()))?;
    Ok(grid.cell_center(ix, iy))
}

/// The four tasks placed on `grid`, endpoints snapped to the nearest free
/// cell centre. Start headings face the goal.
pub fn tasks_for(grid: &OccupancyGrid) -> Result<Vec<Task>> {
    TASK_ENDPOINTS
        .iter()
        .map(|&((sx, sy), (gx, gy))| {
            let s = snap(grid, sx, sy)?;
            let g = snap(grid, gx, gy)?;
            let heading = (g.1 - s.1).atan2(g.0 - s.0);
            Ok(Task { start: Pose2D::new(s.0, s.1, heading), goal: Pose2D::new(g.0, g.1, heading) })
        })
        .collect()
}
