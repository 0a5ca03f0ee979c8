use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::observation::Ratings;

/// One annotator's prediction for one sample under one condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub sample_id: String,
    pub condition: FeatureSet,
    pub predictions: Ratings,
    /// Milliseconds since the Unix epoch, set by the server on acceptance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<u64>,
    pub elapsed_ms: u64,
}

impl AnnotationRecord {
    pub fn key(&self) -> (&str, &str, FeatureSet) {
        (&self.annotator_id, &self.sample_id, self.condition)
    }
}

/// A rendering stage within an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Nav,
    Facial,
    Combined,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Nav => "nav",
            Stage::Facial => "facial",
            Stage::Combined => "combined",
        }
    }

    /// Stages shown for a condition, in the order they must be viewed.
    pub fn sequence(condition: FeatureSet) -> &'static [Stage] {
        match condition {
            FeatureSet::FacialOnly => &[Stage::Facial],
            FeatureSet::NavOnly => &[Stage::Nav],
            FeatureSet::NavPlusFacial => &[Stage::Nav, Stage::Facial, Stage::Combined],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nav" => Ok(Stage::Nav),
            "facial" => Ok(Stage::Facial),
            "combined" => Ok(Stage::Combined),
            other => Err(Error::Config(format!("unknown view '{other}' (nav, facial, combined)"))),
        }
    }
}
