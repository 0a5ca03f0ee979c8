//! Fixed-shape feature tensors for the three annotation conditions.
//!
//! Every frame is reduced to 114 dense channels plus an occupancy crop:
//!
//! | channels  | content                                      |
//! |-----------|----------------------------------------------|
//! | 0..73     | blend shapes                                 |
//! | 73..76    | gaze direction                               |
//! | 76..79    | user pose in the robot frame                 |
//! | 79..103   | up to 8 pedestrian poses, nearest first      |
//! | 103..111  | pedestrian presence mask                     |
//! | 111..114  | goal pose in the robot frame                 |

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{filter_public_space, to_robot_frame, Pose2D};
use crate::grid::{OccupancyGrid, CROP_SIDE};
use crate::observation::{FrameObservation, Phase, Ratings, Sample, BLEND_SHAPES, WINDOW_FRAMES};

pub const MAX_PEDESTRIANS: usize = 8;
pub const BLEND: Range<usize> = 0..BLEND_SHAPES;
pub const GAZE: Range<usize> = 73..76;
pub const USER: Range<usize> = 76..79;
pub const PEDS: Range<usize> = 79..79 + 3 * MAX_PEDESTRIANS;
pub const MASK: Range<usize> = 103..103 + MAX_PEDESTRIANS;
pub const GOAL: Range<usize> = 111..114;
pub const DENSE_CHANNELS: usize = 114;
pub const FACIAL_WIDTH: usize = 76;
pub const AGENT_WIDTH: usize = 3 + 4 * MAX_PEDESTRIANS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    FacialOnly,
    NavOnly,
    NavPlusFacial,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::FacialOnly, FeatureSet::NavOnly, FeatureSet::NavPlusFacial];

    /// Dense raw channels used by this set, in order.
    pub fn dense_channels(self) -> Range<usize> {
        match self {
            FeatureSet::FacialOnly => 0..FACIAL_WIDTH,
            FeatureSet::NavOnly => GAZE.start..DENSE_CHANNELS,
            FeatureSet::NavPlusFacial => 0..DENSE_CHANNELS,
        }
    }

    pub fn uses_occupancy(self) -> bool {
        self != FeatureSet::FacialOnly
    }

    pub fn uses_blend(self) -> bool {
        self != FeatureSet::NavOnly
    }

    /// Per-frame width including the occupancy crop of `crop_cells`²
    /// values.
    pub fn frame_width(self, crop_cells: usize) -> usize {
        self.dense_channels().len() + if self.uses_occupancy() { crop_cells * crop_cells } else { 0 }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            FeatureSet::FacialOnly => "facial",
            FeatureSet::NavOnly => "nav",
            FeatureSet::NavPlusFacial => "both",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "facial" | "FacialOnly" => Ok(FeatureSet::FacialOnly),
            "nav" | "NavOnly" => Ok(FeatureSet::NavOnly),
            "both" | "NavPlusFacial" => Ok(FeatureSet::NavPlusFacial),
            other => Err(Error::Config(format!("unknown feature set {other:?} (expected facial, nav or both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub max_pedestrians: usize,
    pub crop_side: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { max_pedestrians: MAX_PEDESTRIANS, crop_side: CROP_SIDE }
    }
}

/// One frame's features, grouped by family.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    /// Blend shapes followed by gaze.
    pub facial: Vec<f64>,
    /// User pose, pedestrian poses, presence mask.
    pub nav_agents: Vec<f64>,
    pub goal: [f64; 3],
    /// Row-major crop, row 0 at minimum y.
    pub occ: Vec<f64>,
    pub crop_cells: usize,
}

impl FrameFeatures {
    /// The 114 dense channels in canonical order.
    pub fn dense(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(DENSE_CHANNELS);
        v.extend_from_slice(&self.facial);
        v.extend_from_slice(&self.nav_agents);
        v.extend_from_slice(&self.goal);
        v
    }

    /// Flat per-frame vector for `set`.
    pub fn select(&self, set: FeatureSet) -> Vec<f64> {
        let mut v: Vec<f64> = self.dense()[set.dense_channels()].to_vec();
        if set.uses_occupancy() {
            v.extend_from_slice(&self.occ);
        }
        v
    }
}

fn pose3(p: &Pose2D) -> [f64; 3] {
    [p.x, p.y, p.theta]
}

/// Robot-relative dense channels of one frame (no crop).
pub fn dense_frame(frame: &FrameObservation) -> Result<[f64; DENSE_CHANNELS]> {
    let mut v = [0.0; DENSE_CHANNELS];
    v[BLEND].copy_from_slice(frame.blend.values());
    v[GAZE].copy_from_slice(&frame.gaze.components());
    v[USER].copy_from_slice(&pose3(&to_robot_frame(&frame.user, &frame.robot)?));
    let mut peds = filter_public_space(&frame.pedestrians, &frame.robot)?;
    // Stable sort keeps input order among equidistant pedestrians.
    peds.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    for (k, p) in peds.iter().take(MAX_PEDESTRIANS).enumerate() {
        v[PEDS.start + 3 * k..PEDS.start + 3 * k + 3].copy_from_slice(&pose3(p));
        v[MASK.start + k] = 1.0;
    }
    v[GOAL].copy_from_slice(&pose3(&to_robot_frame(&frame.goal, &frame.robot)?));
    Ok(v)
}

pub fn crop_values(map: &OccupancyGrid, robot: &Pose2D, side: f64) -> Result<Vec<f64>> {
    Ok(map.crop(robot, side)?.cells().iter().map(|c| c.value()).collect())
}

pub fn extract_frame(frame: &FrameObservation, map: &OccupancyGrid) -> Result<FrameFeatures> {
    extract_frame_with(frame, map, CROP_SIDE)
}

pub fn extract_frame_with(frame: &FrameObservation, map: &OccupancyGrid, crop_side: f64) -> Result<FrameFeatures> {
    let d = dense_frame(frame)?;
    Ok(FrameFeatures {
        facial: d[0..FACIAL_WIDTH].to_vec(),
        nav_agents: d[USER.start..MASK.end].to_vec(),
        goal: [d[GOAL.start], d[GOAL.start + 1], d[GOAL.start + 2]],
        occ: crop_values(map, &frame.robot, crop_side)?,
        crop_cells: map.crop_cells(crop_side),
    })
}

/// A featurized sample. Dense channels are stored eagerly; occupancy crops
/// are computed on demand from the shared map.
#[derive(Debug, Clone)]
pub struct WindowTensor {
    pub sample_id: String,
    pub participant_id: String,
    pub task_id: u32,
    pub phase: Phase,
    pub labels: Ratings,
    /// `WINDOW_FRAMES x DENSE_CHANNELS`, row-major.
    pub dense: Vec<f64>,
    pub robots: Vec<Pose2D>,
    map: Arc<OccupancyGrid>,
    crop_side: f64,
}

impl WindowTensor {
    pub fn from_sample(sample: &Sample, map: &Arc<OccupancyGrid>, config: &FeatureConfig) -> Result<Self> {
        sample.validate()?;
        if config.max_pedestrians != MAX_PEDESTRIANS {
            return Err(Error::Config(format!("only {MAX_PEDESTRIANS} pedestrian slots are supported")));
        }
        let mut dense = Vec::with_capacity(WINDOW_FRAMES * DENSE_CHANNELS);
        for f in &sample.frames {
            dense.extend_from_slice(&dense_frame(f)?);
        }
        Ok(WindowTensor {
            sample_id: sample.sample_id.clone(),
            participant_id: sample.participant_id.clone(),
            task_id: sample.task_id,
            phase: sample.phase,
            labels: sample.labels,
            dense,
            robots: sample.frames.iter().map(|f| f.robot).collect(),
            map: Arc::clone(map),
            crop_side: config.crop_side,
        })
    }

    pub fn frames(&self) -> usize {
        self.robots.len()
    }

    pub fn crop_cells(&self) -> usize {
        self.map.crop_cells(self.crop_side)
    }

    pub fn dense_frame(&self, k: usize) -> &[f64] {
        &self.dense[k * DENSE_CHANNELS..(k + 1) * DENSE_CHANNELS]
    }

    pub fn crop(&self, k: usize) -> Vec<f64> {
        crop_values(&self.map, &self.robots[k], self.crop_side).expect("window poses are finite")
    }

    pub fn final_crop(&self) -> Vec<f64> {
        self.crop(self.frames() - 1)
    }

    pub fn frame(&self, k: usize) -> FrameFeatures {
        let d = self.dense_frame(k);
        FrameFeatures {
            facial: d[0..FACIAL_WIDTH].to_vec(),
            nav_agents: d[USER.start..MASK.end].to_vec(),
            goal: [d[GOAL.start], d[GOAL.start + 1], d[GOAL.start + 2]],
            occ: self.crop(k),
            crop_cells: self.crop_cells(),
        }
    }

    /// Full `40 x frame_width` flattening for `set`, per-frame crops included.
    pub fn select(&self, set: FeatureSet) -> Vec<f64> {
        (0..self.frames()).flat_map(|k| self.frame(k).select(set)).collect()
    }
}

pub fn select_features(window: &WindowTensor, set: FeatureSet) -> Vec<f64> {
    window.select(set)
}

/// Per-channel z-score over the dense channels. Mask channels and the
/// occupancy crop are left as they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-6;

fn passthrough(channel: usize) -> bool {
    MASK.contains(&channel)
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer { mean: vec![0.0; DENSE_CHANNELS], std: vec![1.0; DENSE_CHANNELS] }
    }

    pub fn fit(windows: &[WindowTensor]) -> Result<Self> {
        let rows: Vec<&[f64]> =
            windows.iter().flat_map(|w| w.dense.chunks_exact(DENSE_CHANNELS)).collect();
        Self::fit_rows(&rows)
    }

    pub fn fit_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("normalizer training set"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; DENSE_CHANNELS];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; DENSE_CHANNELS];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut std: Vec<f64> = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        for c in 0..DENSE_CHANNELS {
            if passthrough(c) {
                mean[c] = 0.0;
                std[c] = 1.0;
            }
        }
        Ok(Normalizer { mean, std })
    }

    pub fn apply_frame(&self, dense: &[f64], out: &mut [f64]) {
        for (c, (o, x)) in out.iter_mut().zip(dense).enumerate() {
            *o = (x - self.mean[c]) / self.std[c];
        }
    }

    /// Normalized copy of a window's dense channels.
    pub fn apply(&self, window: &WindowTensor) -> Vec<f64> {
        let mut out = vec![0.0; window.dense.len()];
        for (src, dst) in window.dense.chunks_exact(DENSE_CHANNELS).zip(out.chunks_exact_mut(DENSE_CHANNELS)) {
            self.apply_frame(src, dst);
        }
        out
    }
}

pub fn fit_normalizer(train: &[WindowTensor]) -> Result<Normalizer> {
    Normalizer::fit(train)
}

/// What a network consumes: the normalized dense sequence restricted to the
/// feature set, plus the final frame's crop when the set uses occupancy.
#[derive(Debug, Clone)]
pub struct ModelInput {
    pub set: FeatureSet,
    /// `frames x width`, row-major.
    pub seq: Vec<f64>,
    pub frames: usize,
    pub width: usize,
    pub crop: Option<Vec<f64>>,
    pub crop_cells: usize,
}

impl ModelInput {
    pub fn new(window: &WindowTensor, set: FeatureSet, norm: &Normalizer) -> Self {
        let normalized = norm.apply(window);
        let ch = set.dense_channels();
        let width = ch.len();
        let mut seq = Vec::with_capacity(window.frames() * width);
        for row in normalized.chunks_exact(DENSE_CHANNELS) {
            seq.extend_from_slice(&row[ch.clone()]);
        }
        ModelInput {
            set,
            seq,
            frames: window.frames(),
            width,
            crop: set.uses_occupancy().then(|| window.final_crop()),
            crop_cells: window.crop_cells(),
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.seq[k * self.width..(k + 1) * self.width]
    }

    /// Position of raw dense channel `c` within a row, if selected.
    pub fn column(&self, c: usize) -> Option<usize> {
        let ch = self.set.dense_channels();
        ch.contains(&c).then(|| c - ch.start)
    }
}
