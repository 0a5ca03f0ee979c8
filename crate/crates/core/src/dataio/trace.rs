//! Self-contained replay packages for the annotation tool.
//!
//! A trace carries everything needed to draw a sample without the map: for
//! every frame the robot-relative agent poses, the gaze and blend vectors,
//! and the map-aligned occupancy crop around the robot, run-length encoded.
//! Ratings are deliberately left out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{filter_public_space, to_robot_frame, Pose2D};
use crate::grid::{Cell, OccupancyGrid, CROP_SIDE};
use crate::observation::{Phase, Sample, FRAME_RATE_HZ};

pub const TRACE_VERSION: u32 = 1;

/// Runs of identical cells in row-major order, as `[code, length]` with
/// codes 0 free, 1 occupied, 2 unknown.
pub fn rle_encode(cells: &[Cell]) -> Vec<[u32; 2]> {
    let code = |c: Cell| match c {
        Cell::Free => 0,
        Cell::Occupied => 1,
        Cell::Unknown => 2,
    };
    let mut out: Vec<[u32; 2]> = Vec::new();
    for &c in cells {
        match out.last_mut() {
            Some(run) if run[0] == code(c) => run[1] += 1,
            _ => out.push([code(c), 1]),
        }
    }
    out
}

pub fn rle_decode(runs: &[[u32; 2]]) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for &[code, n] in runs {
        let c = match code {
            0 => Cell::Free,
            1 => Cell::Occupied,
            2 => Cell::Unknown,
            other => return Err(Error::DegenerateInput(format!("unknown crop code {other}"))),
        };
        out.extend(std::iter::repeat_n(c, n as usize));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropGeometry {
    pub cells: usize,
    pub resolution: f64,
    pub side_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub t: f64,
    /// World pose of the robot.
    pub robot: Pose2D,
    /// Poses below are in the robot frame.
    pub user: Pose2D,
    pub peds: Vec<Pose2D>,
    pub goal: Pose2D,
    pub gaze: [f64; 3],
    pub blend: Vec<f64>,
    /// Robot-frame position of the crop's (0, 0) corner.
    pub crop_origin: Pose2D,
    pub crop_rle: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTrace {
    pub version: u32,
    pub sample_id: String,
    pub participant_id: String,
    pub task_id: u32,
    pub phase: Phase,
    pub frame_rate_hz: f64,
    pub crop: CropGeometry,
    pub legend: BTreeMap<String, String>,
    pub frames: Vec<TraceFrame>,
}

fn legend() -> BTreeMap<String, String> {
    [
        ("robot", "robot pose; the view is centred on it with heading along +x"),
        ("user", "participant pose"),
        ("gaze", "participant gaze direction in the head frame (x forward, y left, z up)"),
        ("peds", "other avatars within 7.2 m of the robot"),
        ("goal", "robot destination"),
        ("crop", "occupancy: 0 free (white), 1 occupied (black), 2 unknown (gray)"),
        ("blend", "73 facial blend-shape activations in [0, 1]"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub fn export_trace(sample: &Sample, map: &OccupancyGrid) -> Result<ReplayTrace> {
    sample.validate()?;
    let n = map.crop_cells(CROP_SIDE);
    let frames = sample
        .frames
        .iter()
        .map(|f| {
            let crop = map.crop(&f.robot, CROP_SIDE)?;
            Ok(TraceFrame {
                t: f.t,
                robot: f.robot,
                user: to_robot_frame(&f.user, &f.robot)?,
                peds: filter_public_space(&f.pedestrians, &f.robot)?,
                goal: to_robot_frame(&f.goal, &f.robot)?,
                gaze: f.gaze.components(),
                blend: f.blend.values().to_vec(),
                crop_origin: to_robot_frame(&crop.origin(), &f.robot)?,
                crop_rle: rle_encode(crop.cells()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplayTrace {
        version: TRACE_VERSION,
        sample_id: sample.sample_id.clone(),
        participant_id: sample.participant_id.clone(),
        task_id: sample.task_id,
        phase: sample.phase,
        frame_rate_hz: FRAME_RATE_HZ,
        crop: CropGeometry { cells: n, resolution: map.resolution(), side_m: CROP_SIDE },
        legend: legend(),
        frames,
    })
}

/// Canonical serialized form; the annotation server sends these bytes.
pub fn trace_bytes(trace: &ReplayTrace) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(trace)?)
}

pub fn parse_trace(bytes: &[u8]) -> Result<ReplayTrace> {
    let t: ReplayTrace = serde_json::from_slice(bytes)?;
    if t.version != TRACE_VERSION {
        return Err(Error::VersionMismatch { what: "trace", found: t.version, expected: TRACE_VERSION });
    }
    Ok(t)
}
