//! The dataset data model: per-tick observations, ratings and samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;

pub const BLEND_SHAPES: usize = 73;
pub const WINDOW_FRAMES: usize = 40;
pub const FRAME_RATE_HZ: f64 = 5.0;
pub const FRAME_DT: f64 = 1.0 / FRAME_RATE_HZ;
const FRAME_DT_TOL: f64 = 1e-9;
const GAZE_NORM_TOL: f64 = 1e-6;

/// Gaze direction in the user's head frame (x forward, y left, z up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct GazeVec {
    dx: f64,
    dy: f64,
    dz: f64,
}

impl GazeVec {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let n = (dx * dx + dy * dy + dz * dz).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > GAZE_NORM_TOL {
            return Err(Error::DegenerateInput(format!("gaze vector norm {n} is not 1")));
        }
        Ok(GazeVec { dx, dy, dz })
    }

    /// Normalise an arbitrary non-zero direction.
    pub fn from_direction(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let n = (dx * dx + dy * dy + dz * dz).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateInput("zero gaze direction".into()));
        }
        Self::new(dx / n, dy / n, dz / n)
    }

    pub fn forward() -> Self {
        GazeVec { dx: 1.0, dy: 0.0, dz: 0.0 }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }
}

impl TryFrom<[f64; 3]> for GazeVec {
    type Error = Error;
    fn try_from([dx, dy, dz]: [f64; 3]) -> Result<Self> {
        GazeVec::new(dx, dy, dz)
    }
}

impl From<GazeVec> for [f64; 3] {
    fn from(g: GazeVec) -> Self {
        g.components()
    }
}

/// The 73 facial blend-shape activations, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BlendShapeVector(Vec<f64>);

impl BlendShapeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != BLEND_SHAPES {
            return Err(Error::LengthMismatch { what: "blend shapes", expected: BLEND_SHAPES, actual: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::DegenerateInput(format!("blend activation {v} outside [0, 1]")));
        }
        Ok(BlendShapeVector(values))
    }

    pub fn uniform(value: f64) -> Result<Self> {
        Self::new(vec![value; BLEND_SHAPES])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for BlendShapeVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        BlendShapeVector::new(v)
    }
}

impl From<BlendShapeVector> for Vec<f64> {
    fn from(b: BlendShapeVector) -> Self {
        b.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub t: f64,
    pub robot: Pose2D,
    pub user: Pose2D,
    pub gaze: GazeVec,
    pub blend: BlendShapeVector,
    #[serde(rename = "peds")]
    pub pedestrians: Vec<Pose2D>,
    pub goal: Pose2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Before,
    After,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Before => "Before",
            Phase::After => "After",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    Competence,
    Surprise,
    Intention,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Competence, Dimension::Surprise, Dimension::Intention];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Competence => "competence",
            Dimension::Surprise => "surprise",
            Dimension::Intention => "intention",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Five-point ratings on the three performance dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRatings", into = "RawRatings")]
pub struct Ratings {
    competence: u8,
    surprise: u8,
    intention: u8,
}

#[derive(Serialize, Deserialize)]
struct RawRatings {
    competence: i64,
    surprise: i64,
    intention: i64,
}

impl TryFrom<RawRatings> for Ratings {
    type Error = Error;
    fn try_from(r: RawRatings) -> Result<Self> {
        Ratings::new(r.competence, r.surprise, r.intention)
    }
}

impl From<Ratings> for RawRatings {
    fn from(r: Ratings) -> Self {
        RawRatings { competence: r.competence as i64, surprise: r.surprise as i64, intention: r.intention as i64 }
    }
}

pub(crate) fn check_rating(dimension: Dimension, value: i64) -> Result<u8> {
    if (1..=5).contains(&value) {
        Ok(value as u8)
    } else {
        Err(Error::RatingOutOfRange { dimension: dimension.name(), value })
    }
}

impl Ratings {
    pub fn new(competence: i64, surprise: i64, intention: i64) -> Result<Self> {
        Ok(Ratings {
            competence: check_rating(Dimension::Competence, competence)?,
            surprise: check_rating(Dimension::Surprise, surprise)?,
            intention: check_rating(Dimension::Intention, intention)?,
        })
    }

    /// Build from zero-based class indices (0..5), as produced by classifiers.
    pub fn from_classes(classes: [usize; 3]) -> Result<Self> {
        Ratings::new(classes[0] as i64 + 1, classes[1] as i64 + 1, classes[2] as i64 + 1)
    }

    pub fn get(&self, d: Dimension) -> u8 {
        match d {
            Dimension::Competence => self.competence,
            Dimension::Surprise => self.surprise,
            Dimension::Intention => self.intention,
        }
    }

    pub fn competence(&self) -> u8 {
        self.competence
    }

    pub fn surprise(&self) -> u8 {
        self.surprise
    }

    pub fn intention(&self) -> u8 {
        self.intention
    }

    pub fn as_array(&self) -> [u8; 3] {
        [self.competence, self.surprise, self.intention]
    }

    /// Zero-based class indices.
    pub fn classes(&self) -> [usize; 3] {
        self.as_array().map(|r| r as usize - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub participant_id: String,
    pub task_id: u32,
    pub phase: Phase,
    pub frames: Vec<FrameObservation>,
    pub labels: Ratings,
}

impl Sample {
    /// Check the window shape: 40 frames, 0.2 s apart, finite poses.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSample { sample_id: self.sample_id.clone(), reason };
        if self.frames.len() != WINDOW_FRAMES {
            return Err(fail(format!("expected {WINDOW_FRAMES} frames, found {}", self.frames.len())));
        }
        for (k, pair) in self.frames.windows(2).enumerate() {
            let dt = pair[1].t - pair[0].t;
            if (dt - FRAME_DT).abs() > FRAME_DT_TOL {
                return Err(fail(format!("frames {k} and {} are {dt} s apart", k + 1)));
            }
        }
        for (k, f) in self.frames.iter().enumerate() {
            let poses = [f.robot, f.user, f.goal].into_iter().chain(f.pedestrians.iter().copied());
            if !f.t.is_finite() || poses.into_iter().any(|p| !p.is_finite()) {
                return Err(fail(format!("frame {k} has non-finite values")));
            }
        }
        Ok(())
    }

    pub fn last_frame(&self) -> &FrameObservation {
        self.frames.last().expect("validated samples have frames")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaze_must_be_unit() {
        assert!(GazeVec::new(1.0, 0.0, 0.0).is_ok());
        assert!(GazeVec::new(0.5, 0.0, 0.0).is_err());
        let g = GazeVec::from_direction(3.0, 4.0, 0.0).unwrap();
        assert!((g.components()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn blend_shape_length_and_range() {
        assert!(BlendShapeVector::new(vec![0.1; 73]).is_ok());
        assert!(BlendShapeVector::new(vec![0.1; 72]).is_err());
        let mut v = vec![0.0; 73];
        v[5] = 1.2;
        assert!(BlendShapeVector::new(v).is_err());
    }

    #[test]
    fn ratings_bounds() {
        assert!(Ratings::new(1, 5, 3).is_ok());
        assert!(Ratings::new(0, 5, 3).is_err());
        assert!(Ratings::new(1, 6, 3).is_err());
        let r = Ratings::from_classes([0, 4, 2]).unwrap();
        assert_eq!(r.as_array(), [1, 5, 3]);
        assert_eq!(r.classes(), [0, 4, 2]);
        assert!(serde_json::from_str::<Ratings>(r#"{"competence":6,"surprise":1,"intention":1}"#).is_err());
    }
}
