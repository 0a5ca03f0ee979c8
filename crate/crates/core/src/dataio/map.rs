//! Text map format.
//!
//! ```text
//! width height resolution [origin_x origin_y origin_theta]
//! <height rows of width characters; '#' occupied, '.' free, '?' unknown>
//! ```
//!
//! The first grid row is y index 0 (minimum y).

use std::fmt::Write;
use std::path::Path;

use crate::dataio::write_atomic;
use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::grid::{Cell, OccupancyGrid};

pub fn parse_map(text: &str, path: &str) -> Result<OccupancyGrid> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_string(), line, message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header line".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 && fields.len() != 6 {
        return Err(err(1, format!("expected `width height resolution [ox oy otheta]`, found `{header}`")));
    }
    let width: usize = fields[0].parse().map_err(|_| err(1, format!("bad width `{}`", fields[0])))?;
    let height: usize = fields[1].parse().map_err(|_| err(1, format!("bad height `{}`", fields[1])))?;
    let num = |i: usize| fields[i].parse::<f64>().map_err(|_| err(1, format!("bad number `{}`", fields[i])));
    let resolution = num(2)?;
    let origin = if fields.len() == 6 { Pose2D::new(num(3)?, num(4)?, num(5)?) } else { Pose2D::default() };
    if width == 0 || height == 0 {
        return Err(err(1, "map must have at least one cell".into()));
    }
    let mut cells = Vec::with_capacity(width * height);
    for row in 0..height {
        let line_no = row + 2;
        let line = lines.next().ok_or_else(|| err(line_no, format!("missing row {row} (expected {height} rows)")))?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let n = line.chars().count();
        if n != width {
            return Err(err(line_no, format!("row {row} has {n} cells, expected {width}")));
        }
        for (col, c) in line.chars().enumerate() {
            cells.push(Cell::from_symbol(c).ok_or_else(|| err(line_no, format!("unknown cell character `{c}` at column {col}")))?);
        }
    }
    if let Some((i, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(height + 2 + i, "unexpected content after the last row".into()));
    }
    OccupancyGrid::new(width, height, resolution, origin, cells).map_err(|e| err(1, e.to_string()))
}

pub fn format_map(grid: &OccupancyGrid) -> String {
    let mut out = String::with_capacity((grid.width() + 1) * grid.height() + 32);
    write!(out, "{} {} {}", grid.width(), grid.height(), grid.resolution()).unwrap();
    let o = grid.origin();
    if o != Pose2D::default() {
        write!(out, " {} {} {}", o.x, o.y, o.theta).unwrap();
    }
    out.push('\n');
    for row in grid.cells().chunks(grid.width()) {
        out.extend(row.iter().map(|c| c.symbol()));
        out.push('\n');
    }
    out
}

pub fn read_map(path: &Path) -> Result<OccupancyGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text, &path.display().to_string())
}

pub fn write_map(grid: &OccupancyGrid, path: &Path) -> Result<()> {
    write_atomic(path, format_map(grid).as_bytes())
}
