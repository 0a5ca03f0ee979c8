//! Static occupancy maps and robot-centred crops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{from_robot_frame, to_robot_frame, Pose2D};

/// Side length of the occupancy crop around the robot, in meters.
pub const CROP_SIDE: f64 = 7.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    /// Encoding used by feature tensors: Free 0, Occupied 1, Unknown 0.5.
    pub fn value(self) -> f64 {
        match self {
            Cell::Free => 0.0,
            Cell::Occupied => 1.0,
            Cell::Unknown => 0.5,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Occupied => '#',
            Cell::Unknown => '?',
        }
    }

    pub fn from_symbol(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Free),
            '#' => Some(Cell::Occupied),
            '?' => Some(Cell::Unknown),
            _ => None,
        }
    }
}

/// Row-major grid; row 0 holds the cells with minimum y. `origin` is the
/// world pose of the outer corner of cell (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Pose2D,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2D, cells: Vec<Cell>) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Config(format!("resolution must be positive, got {resolution}")));
        }
        if !origin.is_finite() {
            return Err(Error::NonFinite("grid origin"));
        }
        if width.checked_mul(height) != Some(cells.len()) {
            return Err(Error::LengthMismatch { what: "grid cells", expected: width * height, actual: cells.len() });
        }
        Ok(OccupancyGrid { resolution, origin, width, height, cells })
    }

    pub fn filled(width: usize, height: usize, resolution: f64, cell: Cell) -> Result<Self> {
        Self::new(width, height, resolution, Pose2D::default(), vec![cell; width * height])
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn get(&self, ix: usize, iy: usize) -> Cell {
        self.cells[self.index(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, cell: Cell) {
        let i = self.index(ix, iy);
        self.cells[i] = cell;
    }

    /// Cell containing the world point, or `None` when it falls off the map.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let local = to_robot_frame(&Pose2D::new(x, y, 0.0), &self.origin).ok()?;
        let fx = (local.x / self.resolution).floor();
        let fy = (local.y / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let local = Pose2D::new((ix as f64 + 0.5) * self.resolution, (iy as f64 + 0.5) * self.resolution, 0.0);
        let w = from_robot_frame(&local, &self.origin).expect("finite grid geometry");
        (w.x, w.y)
    }

    /// Cell state at a world point; off-map points are `Unknown`.
    pub fn cell_at(&self, x: f64, y: f64) -> Cell {
        self.world_to_cell(x, y).map_or(Cell::Unknown, |(ix, iy)| self.get(ix, iy))
    }

    pub fn is_free_at(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y) == Cell::Free
    }

    /// True when every point sampled along the segment lies on a Free cell.
    pub fn segment_is_free(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let steps = (len / (self.resolution * 0.25)).ceil().max(1.0) as usize;
        (0..=steps).all(|k| {
            let t = k as f64 / steps as f64;
            self.is_free_at(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
        })
    }

    /// Nearest Free cell to a world point by breadth-first search.
    pub fn nearest_free(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let start = self.world_to_cell(x, y).or_else(|| {
            let local = to_robot_frame(&Pose2D::new(x, y, 0.0), &self.origin).ok()?;
            let cx = (local.x / self.resolution).floor().clamp(0.0, (self.width - 1) as f64);
            let cy = (local.y / self.resolution).floor().clamp(0.0, (self.height - 1) as f64);
            Some((cx as usize, cy as usize))
        })?;
        let mut seen = vec![false; self.cells.len()];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[self.index(start.0, start.1)] = true;
        while let Some((cx, cy)) = queue.pop_front() {
            if self.get(cx, cy) == Cell::Free {
                return Some((cx, cy));
            }
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let nx = cx as i64 + dx;
                let ny = cy as i64 + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                    let i = self.index(nx as usize, ny as usize);
                    if !seen[i] {
                        seen[i] = true;
                        queue.push_back((nx as usize, ny as usize));
                    }
                }
            }
        }
        None
    }

    /// Number of cells per side of a crop of `side` meters.
    pub fn crop_cells(&self, side: f64) -> usize {
        ((side / self.resolution).round() as usize).max(1)
    }

    /// Map-aligned square crop centred on the robot position. Cells whose
    /// centres fall off the source map are `Unknown`.
    pub fn crop(&self, robot: &Pose2D, side: f64) -> Result<OccupancyGrid> {
        if !(side > 0.0) {
            return Err(Error::Config(format!("crop side must be positive, got {side}")));
        }
        let n = self.crop_cells(side);
        let local = to_robot_frame(robot, &self.origin)?;
        let half = n as f64 * self.resolution / 2.0;
        let corner = (local.x - half, local.y - half);
        let mut cells = Vec::with_capacity(n * n);
        for cj in 0..n {
            let cy = corner.1 + (cj as f64 + 0.5) * self.resolution;
            let fy = (cy / self.resolution).floor();
            for ci in 0..n {
                let cx = corner.0 + (ci as f64 + 0.5) * self.resolution;
                let fx = (cx / self.resolution).floor();
                let cell = if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
                    Cell::Unknown
                } else {
                    self.get(fx as usize, fy as usize)
                };
                cells.push(cell);
            }
        }
        let origin = from_robot_frame(&Pose2D::new(corner.0, corner.1, 0.0), &self.origin)?;
        OccupancyGrid::new(n, n, self.resolution, origin, cells)
    }
}

/// Free function form of [`OccupancyGrid::crop`].
pub fn crop_occupancy(grid: &OccupancyGrid, robot: &Pose2D, side: f64) -> Result<OccupancyGrid> {
    grid.crop(robot, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize) -> OccupancyGrid {
        let cells = (0..w * h)
            .map(|_| match rng.random_range(0..10) {
                0..=5 => Cell::Free,
                6..=8 => Cell::Occupied,
                _ => Cell::Unknown,
            })
            .collect();
        OccupancyGrid::new(w, h, 0.15, Pose2D::new(-1.0, 2.0, 0.0), cells).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(OccupancyGrid::new(2, 2, 0.0, Pose2D::default(), vec![Cell::Free; 4]).is_err());
        assert!(OccupancyGrid::new(2, 2, 0.1, Pose2D::default(), vec![Cell::Free; 3]).is_err());
    }

    #[test]
    fn crop_of_uniform_map_is_uniform() {
        let g = OccupancyGrid::filled(200, 200, 0.15, Cell::Free).unwrap();
        let c = g.crop(&Pose2D::new(15.0, 15.0, 1.0), CROP_SIDE).unwrap();
        assert_eq!((c.width(), c.height()), (48, 48));
        assert!(c.cells().iter().all(|&x| x == Cell::Free));
    }

    #[test]
    fn crop_at_corner_has_unknown_quadrants() {
        let g = OccupancyGrid::filled(100, 100, 0.15, Cell::Free).unwrap();
        let c = g.crop(&Pose2D::new(0.01, 0.01, 0.0), CROP_SIDE).unwrap();
        let n = c.width();
        // Lower-left quadrant is off the map; upper-right is on it.
        assert_eq!(c.get(0, 0), Cell::Unknown);
        assert_eq!(c.get(n / 2 - 2, n - 1), Cell::Unknown);
        assert_eq!(c.get(n - 1, n / 2 - 2), Cell::Unknown);
        assert_eq!(c.get(n - 1, n - 1), Cell::Free);
        assert_eq!(c.get(n / 2 + 1, n / 2 + 1), Cell::Free);
    }

    #[test]
    fn off_map_robot_gives_all_unknown() {
        let g = OccupancyGrid::filled(10, 10, 0.15, Cell::Free).unwrap();
        let c = g.crop(&Pose2D::new(100.0, 100.0, 0.0), CROP_SIDE).unwrap();
        assert!(c.cells().iter().all(|&x| x == Cell::Unknown));
    }

    #[test]
    fn crop_matches_world_lookup_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_grid(&mut rng, 80, 60);
            let robot = Pose2D::new(rng.random_range(-3.0..12.0), rng.random_range(0.0..13.0), rng.random_range(-3.0..3.0));
            let c = g.crop(&robot, CROP_SIDE).unwrap();
            assert_eq!(c.width(), 48);
            for cj in 0..c.height() {
                for ci in 0..c.width() {
                    // Oracle: world centre of the crop cell, then a plain lookup.
                    let wx = robot.x + (ci as f64 + 0.5 - 24.0) * 0.15;
                    let wy = robot.y + (cj as f64 + 0.5 - 24.0) * 0.15;
                    let ox = ((wx - g.origin().x) / 0.15).floor();
                    let oy = ((wy - g.origin().y) / 0.15).floor();
                    let expected = if ox < 0.0 || oy < 0.0 || ox >= 80.0 || oy >= 60.0 {
                        Cell::Unknown
                    } else {
                        g.cells()[oy as usize * 80 + ox as usize]
                    };
                    assert_eq!(c.get(ci, cj), expected, "cell ({ci}, {cj})");
                }
            }
        }
    }

    #[test]
    fn crop_dimensions_do_not_depend_on_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_grid(&mut rng, 30, 30);
        for _ in 0..50 {
            let p = Pose2D::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), 0.0);
            let c = g.crop(&p, CROP_SIDE).unwrap();
            assert_eq!((c.width(), c.height()), (48, 48));
        }
    }
}
