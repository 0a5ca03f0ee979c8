//! Social-navigation simulator and impression-inference toolkit.

pub mod annotate;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod grid;
pub mod labels;
pub mod models;
pub mod nn;
pub mod observation;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{filter_public_space, from_robot_frame, normalize_angle, to_robot_frame, Pose2D};
pub use grid::{crop_occupancy, Cell, OccupancyGrid};
pub use labels::{binarize, BinaryLabel, Binarizer};
pub use observation::{BlendShapeVector, Dimension, FrameObservation, GazeVec, Phase, Ratings, Sample};
